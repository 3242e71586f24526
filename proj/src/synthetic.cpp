#include "vulnshot/synthetic.hpp"

#include <array>
#include <cstdio>
#include <string>
#include <vector>

#include "vulnshot/errors.hpp"
#include "vulnshot/rng.hpp"

namespace vulnshot {

namespace {

template <std::size_t N>
const char* pick(std::mt19937_64& gen, const std::array<const char*, N>& options) {
  return options[rng::bounded(gen, N)];
}

constexpr std::array<const char*, 10> kFunctionVerbs = {
    "parse", "load", "handle", "process", "read", "update", "decode", "init", "copy", "format"};
constexpr std::array<const char*, 10> kFunctionNouns = {
    "packet", "header", "config", "record", "frame", "entry", "message", "request", "token",
    "chunk"};
constexpr std::array<const char*, 8> kNoise = {
    "    int rc = 0;\n",
    "    log_debug(\"enter\");\n",
    "    if (flags & FLAG_VERBOSE)\n        trace(ctx_id);\n",
    "    unsigned retries = 3;\n",
    "    stats.calls++;\n",
    "    lock_acquire(&global_lock);\n    lock_release(&global_lock);\n",
    "    if (mode == MODE_FAST)\n        rc = 1;\n",
    "    counter += step;\n",
};

// Planted idioms, one vocabulary per label.
constexpr std::array<const char*, 4> kIdioms119 = {
    "    char buf[64];\n    for (i = 0; i <= len; i++)\n        buf[i] = src[i];\n",
    "    unsigned char table[16];\n    table[index] = value;\n",
    "    memcpy(dst, src, len + 1);\n",
    "    int slots[8];\n    while (n--)\n        slots[n + 1] = read_slot(n);\n",
};
constexpr std::array<const char*, 4> kIdioms120 = {
    "    char name[32];\n    strcpy(name, input);\n",
    "    char tmp[128];\n    sprintf(tmp, \"%s/%s\", dir, arg);\n",
    "    char line[80];\n    gets(line);\n",
    "    char path[256];\n    strcat(path, suffix);\n",
};
constexpr std::array<const char*, 4> kIdioms469 = {
    "    ptrdiff_t off = end - begin;\n",
    "    size_t count = (q - p) / sizeof(*p);\n",
    "    int *cursor = base + (last - first);\n",
    "    long span = tail_ptr - head_ptr;\n",
};
constexpr std::array<const char*, 4> kIdioms476 = {
    "    struct node *nd = lookup(key);\n    nd->next = NULL;\n",
    "    obj = malloc(size);\n    obj->refcount = 0;\n",
    "    if (ctx == NULL)\n        log_error(\"no ctx\");\n    ctx->state = STATE_READY;\n",
    "    return dev->ops->read(dev);\n",
};

const char* idiom(std::mt19937_64& gen, CweLabel label) {
  switch (label) {
    case CweLabel::kCwe119: return pick(gen, kIdioms119);
    case CweLabel::kCwe120: return pick(gen, kIdioms120);
    case CweLabel::kCwe469: return pick(gen, kIdioms469);
    case CweLabel::kCwe476: return pick(gen, kIdioms476);
  }
  return "";
}

std::string make_function(std::mt19937_64& gen, const LabelSet& truth) {
  std::string out = "int ";
  out += pick(gen, kFunctionVerbs);
  out += "_";
  out += pick(gen, kFunctionNouns);
  out += "_" + std::to_string(rng::bounded(gen, 1000));
  out += "(const char *src, size_t len)\n{\n";
  const auto noise_count = 1 + rng::bounded(gen, 3);
  for (std::uint64_t i = 0; i < noise_count; ++i) out += pick(gen, kNoise);
  for (CweLabel l : truth.sorted()) out += idiom(gen, l);
  out += pick(gen, kNoise);
  out += "    return rc;\n}\n";
  return out;
}

std::string group_name(const LabelSet& truth) {
  std::string name;
  for (CweLabel l : truth.sorted()) {
    if (!name.empty()) name += "+";
    name += std::to_string(cwe_number(l));
  }
  return name;
}

}  // namespace

Corpus make_synthetic_corpus(std::uint64_t seed, std::size_t n_per_label) {
  if (n_per_label == 0) throw UsageError("n_per_label must be at least 1");

  std::vector<std::pair<LabelSet, std::size_t>> groups;
  for (CweLabel l : kAllLabels) groups.push_back({LabelSet{l}, n_per_label});
  const std::size_t n_multi = std::max<std::size_t>(1, n_per_label / 5);
  for (LabelSet pair : {LabelSet{CweLabel::kCwe119, CweLabel::kCwe120},
                        LabelSet{CweLabel::kCwe119, CweLabel::kCwe476},
                        LabelSet{CweLabel::kCwe120, CweLabel::kCwe476},
                        LabelSet{CweLabel::kCwe469, CweLabel::kCwe476}}) {
    groups.push_back({pair, n_multi});
  }

  std::vector<CodeSample> train;
  std::vector<CodeSample> test;
  for (const auto& [truth, count] : groups) {
    const std::string group = group_name(truth);
    auto gen = rng::keyed(seed, group);
    for (std::size_t i = 0; i < count; ++i) {
      char id[64];
      std::snprintf(id, sizeof id, "syn-%s-%03zu", group.c_str(), i);
      CodeSample sample{id, make_function(gen, truth), truth};
      (i % 5 == 4 ? test : train).push_back(std::move(sample));
    }
  }
  IngestStats stats;
  stats.records = train.size() + test.size();
  stats.retained = stats.records;
  return Corpus(std::move(train), std::move(test), stats);
}

}  // namespace vulnshot
