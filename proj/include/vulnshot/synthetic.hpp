#pragma once

#include <cstddef>
#include <cstdint>

#include "vulnshot/corpus.hpp"

namespace vulnshot {

/// Desk-scale fixture: C-like functions with planted lexical idioms per
/// weakness (unchecked buffer writes for 119, unbounded string copies for
/// 120, pointer subtraction for 469, unchecked dereference for 476).
///
/// Per label, n_per_label single-label samples; per label pair in
/// {119+120, 119+476, 120+476, 469+476}, max(1, n_per_label / 5)
/// two-label samples. Within every group, each fifth sample goes to the
/// test split. Output depends only on (seed, n_per_label).
Corpus make_synthetic_corpus(std::uint64_t seed, std::size_t n_per_label);

}  // namespace vulnshot
