#include "scan/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <set>

#include "binio.hpp"
#include "scan/error.hpp"
#include "scan/rng.hpp"

namespace scan {

namespace {

constexpr char kMagic[8] = {'S', 'C', 'A', 'N', 'D', 'A', 'T', 'A'};
constexpr std::uint32_t kFormatVersion = 1;

std::uint32_t crc_of(const std::uint8_t* p, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(0L, p, static_cast<uInt>(n)));
}

std::string manifest_path(const std::string& path) { return path + ".manifest.json"; }

// Token pool layout: id 0 is padding, the next chunk is the shared common
// pool, the rest is divided evenly among classes.
struct TokenPools {
  std::uint32_t common_begin, common_end;  // [begin, end)
  std::uint32_t class_begin, per_class;

  std::pair<std::uint32_t, std::uint32_t> class_range(std::uint32_t k) const {
    return {class_begin + k * per_class, class_begin + (k + 1) * per_class};
  }
};

TokenPools make_pools(const SyntheticConfig& cfg) {
  const std::uint32_t usable = cfg.vocab_size - 1;
  std::uint32_t common = std::max<std::uint32_t>(1, usable / 4);
  std::uint32_t per_class = (usable - common) / cfg.num_classes;
  return TokenPools{1, 1 + common, 1 + common, per_class};
}

}  // namespace

void SyntheticConfig::validate() const {
  if (num_classes < 1 || pairs_per_class < 1 || latent_dim < 1 || sentence_dim < 1 ||
      image_dim < 1)
    throw ConfigError("synthetic config: all counts and dims must be >= 1");
  if (noise_sigma < 0.0 || pair_latent_scale < 0.0)
    throw ConfigError("synthetic config: noise_sigma and pair_latent_scale must be >= 0");
  if (tokens_min < 1 || tokens_min > tokens_max)
    throw ConfigError("synthetic config: need 1 <= tokens_min <= tokens_max");
  if (sentences_min < 1 || sentences_min > sentences_max)
    throw ConfigError("synthetic config: need 1 <= sentences_min <= sentences_max");
  if (common_token_fraction < 0.0 || common_token_fraction > 1.0)
    throw ConfigError("synthetic config: common_token_fraction must lie in [0, 1]");
  if (vocab_size < 2) throw ConfigError("synthetic config: vocab_size must be >= 2");
  const TokenPools pools = make_pools(*this);
  if (pools.per_class == 0)
    throw ConfigError("synthetic config: vocabulary too small for " +
                      std::to_string(num_classes) + " class token pools");
}

Dataset synthetic_generate(const SyntheticConfig& cfg) {
  cfg.validate();
  const TokenPools pools = make_pools(cfg);

  // Independent seeded streams so a change in one section does not shift
  // the draws of another.
  auto proj_rng = make_engine(derive_seed(cfg.seed, 1));
  auto class_rng = make_engine(derive_seed(cfg.seed, 2));
  auto pair_rng = make_engine(derive_seed(cfg.seed, 3));
  std::normal_distribution<double> unit(0.0, 1.0);

  const std::size_t L = cfg.latent_dim;
  const double proj_scale = 1.0 / std::sqrt(static_cast<double>(L));
  std::vector<double> a_img(cfg.image_dim * L);
  std::vector<double> a_ins(cfg.sentence_dim * L);
  for (double& v : a_img) v = unit(proj_rng) * proj_scale;
  for (double& v : a_ins) v = unit(proj_rng) * proj_scale;

  std::vector<std::vector<double>> centers(cfg.num_classes, std::vector<double>(L));
  for (auto& c : centers)
    for (double& v : c) v = unit(class_rng);

  Dataset ds;
  ds.manifest.format_version = kFormatVersion;
  ds.manifest.split = "all";
  ds.manifest.num_classes = cfg.num_classes;
  ds.manifest.vocab_size = cfg.vocab_size;
  ds.manifest.sentence_dim = cfg.sentence_dim;
  ds.manifest.image_dim = cfg.image_dim;
  ds.manifest.seed = cfg.seed;

  std::uint64_t next_pair_id = 1;
  std::vector<double> latent(L);
  for (std::uint32_t k = 0; k < cfg.num_classes; ++k) {
    const auto [cls_lo, cls_hi] = pools.class_range(k);
    for (std::uint32_t p = 0; p < cfg.pairs_per_class; ++p) {
      FoodPairRecord rec;
      rec.pair_id = next_pair_id++;
      rec.label = k;

      for (std::size_t i = 0; i < L; ++i)
        latent[i] = centers[k][i] + cfg.pair_latent_scale * unit(pair_rng);

      rec.image.resize(cfg.image_dim);
      for (std::uint32_t r = 0; r < cfg.image_dim; ++r) {
        double v = 0.0;
        for (std::size_t i = 0; i < L; ++i) v += a_img[r * L + i] * latent[i];
        rec.image[r] = static_cast<float>(v + cfg.noise_sigma * unit(pair_rng));
      }

      std::uniform_int_distribution<std::uint32_t> sent_count(cfg.sentences_min,
                                                              cfg.sentences_max);
      rec.n_sentences = sent_count(pair_rng);
      rec.sentences.resize(static_cast<std::size_t>(rec.n_sentences) * cfg.sentence_dim);
      for (std::uint32_t s = 0; s < rec.n_sentences; ++s)
        for (std::uint32_t r = 0; r < cfg.sentence_dim; ++r) {
          double v = 0.0;
          for (std::size_t i = 0; i < L; ++i) v += a_ins[r * L + i] * latent[i];
          rec.sentences[static_cast<std::size_t>(s) * cfg.sentence_dim + r] =
              static_cast<float>(v + cfg.noise_sigma * unit(pair_rng));
        }

      std::uniform_int_distribution<std::uint32_t> tok_count(cfg.tokens_min, cfg.tokens_max);
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      std::uniform_int_distribution<std::uint32_t> common_tok(pools.common_begin,
                                                              pools.common_end - 1);
      std::uniform_int_distribution<std::uint32_t> class_tok(cls_lo, cls_hi - 1);
      const std::uint32_t n_tok = tok_count(pair_rng);
      rec.tokens.resize(n_tok);
      for (std::uint32_t t = 0; t < n_tok; ++t)
        rec.tokens[t] =
            (coin(pair_rng) < cfg.common_token_fraction) ? common_tok(pair_rng)
                                                         : class_tok(pair_rng);
      ds.records.push_back(std::move(rec));
    }
  }
  ds.manifest.record_count = ds.records.size();
  validate_dataset(ds);
  return ds;
}

void validate_dataset(const Dataset& ds) {
  const DatasetManifest& m = ds.manifest;
  if (m.record_count != ds.records.size())
    throw ValidationError("manifest record count " + std::to_string(m.record_count) +
                          " does not match " + std::to_string(ds.records.size()) +
                          " records");
  std::set<std::uint64_t> seen;
  for (const FoodPairRecord& r : ds.records) {
    const std::string who = "pair " + std::to_string(r.pair_id);
    if (!seen.insert(r.pair_id).second)
      throw ValidationError(who + ": duplicate pair id");
    if (r.label >= m.num_classes)
      throw ValidationError(who + ": class label " + std::to_string(r.label) +
                            " out of range [0, " + std::to_string(m.num_classes) + ")");
    if (r.tokens.empty()) throw ValidationError(who + ": no ingredient tokens");
    for (std::uint32_t t : r.tokens)
      if (t >= m.vocab_size)
        throw ValidationError(who + ": token id " + std::to_string(t) +
                              " outside vocabulary of size " + std::to_string(m.vocab_size));
    if (r.n_sentences < 1) throw ValidationError(who + ": no instruction sentences");
    if (r.sentences.size() !=
        static_cast<std::size_t>(r.n_sentences) * m.sentence_dim)
      throw ValidationError(who + ": sentence payload size " +
                            std::to_string(r.sentences.size()) + " != " +
                            std::to_string(r.n_sentences) + " x " +
                            std::to_string(m.sentence_dim));
    if (r.image.size() != m.image_dim)
      throw ValidationError(who + ": image feature size " + std::to_string(r.image.size()) +
                            " != " + std::to_string(m.image_dim));
    for (float v : r.sentences)
      if (!std::isfinite(v)) throw ValidationError(who + ": non-finite sentence value");
    for (float v : r.image)
      if (!std::isfinite(v)) throw ValidationError(who + ": non-finite image value");
  }
}

void save_dataset(const std::string& path, const Dataset& ds) {
  validate_dataset(ds);

  binio::Writer body;
  for (const FoodPairRecord& r : ds.records) {
    binio::Writer rec;
    rec.u64(r.pair_id);
    rec.u32(r.label);
    rec.u32(static_cast<std::uint32_t>(r.tokens.size()));
    for (std::uint32_t t : r.tokens) rec.u32(t);
    rec.u32(r.n_sentences);
    for (float v : r.sentences) rec.f32(v);
    for (float v : r.image) rec.f32(v);
    body.u32(static_cast<std::uint32_t>(rec.bytes.size()));
    body.raw(rec.bytes.data(), rec.bytes.size());
  }

  binio::Writer out;
  out.raw(kMagic, sizeof(kMagic));
  out.u32(kFormatVersion);
  out.u64(ds.records.size());
  out.u32(ds.manifest.num_classes);
  out.u32(ds.manifest.vocab_size);
  out.u32(ds.manifest.sentence_dim);
  out.u32(ds.manifest.image_dim);
  out.raw(body.bytes.data(), body.bytes.size());
  out.u32(crc_of(body.bytes.data(), body.bytes.size()));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(out.bytes.data()),
          static_cast<std::streamsize>(out.bytes.size()));
  if (!f) throw IoError("short write to " + path);

  nlohmann::json j;
  j["format_version"] = ds.manifest.format_version;
  j["split"] = ds.manifest.split;
  j["record_count"] = ds.manifest.record_count;
  j["num_classes"] = ds.manifest.num_classes;
  j["vocab_size"] = ds.manifest.vocab_size;
  j["sentence_dim"] = ds.manifest.sentence_dim;
  j["image_dim"] = ds.manifest.image_dim;
  if (ds.manifest.seed) j["seed"] = *ds.manifest.seed;
  std::ofstream mf(manifest_path(path), std::ios::trunc);
  if (!mf) throw IoError("cannot open " + manifest_path(path) + " for writing");
  mf << j.dump(2) << '\n';
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  binio::Reader in{bytes.data(), bytes.size()};

  char magic[8];
  in.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ParseError(path + ": bad magic, not a dataset file");
  const std::uint32_t version = in.u32();
  if (version != kFormatVersion)
    throw ParseError(path + ": unsupported format version " + std::to_string(version));

  Dataset ds;
  const std::uint64_t n_records = in.u64();
  ds.manifest.format_version = version;
  ds.manifest.record_count = n_records;
  ds.manifest.num_classes = in.u32();
  ds.manifest.vocab_size = in.u32();
  ds.manifest.sentence_dim = in.u32();
  ds.manifest.image_dim = in.u32();

  const std::size_t body_begin = in.off;
  ds.records.reserve(n_records);
  for (std::uint64_t i = 0; i < n_records; ++i) {
    const std::uint32_t rec_len = in.u32();
    const std::size_t rec_begin = in.off;
    in.need(rec_len);
    FoodPairRecord r;
    r.pair_id = in.u64();
    r.label = in.u32();
    const std::uint32_t n_tok = in.u32();
    r.tokens.resize(n_tok);
    for (std::uint32_t t = 0; t < n_tok; ++t) r.tokens[t] = in.u32();
    r.n_sentences = in.u32();
    r.sentences.resize(static_cast<std::size_t>(r.n_sentences) * ds.manifest.sentence_dim);
    for (float& v : r.sentences) v = in.f32();
    r.image.resize(ds.manifest.image_dim);
    for (float& v : r.image) v = in.f32();
    if (in.off - rec_begin != rec_len)
      throw ParseError(path + ": record " + std::to_string(i) + " length mismatch at byte offset " +
                       std::to_string(rec_begin) + " (declared " + std::to_string(rec_len) +
                       ", consumed " + std::to_string(in.off - rec_begin) + ")");
    ds.records.push_back(std::move(r));
  }
  const std::size_t body_end = in.off;
  const std::uint32_t stored_crc = in.u32();
  const std::uint32_t actual_crc = crc_of(bytes.data() + body_begin, body_end - body_begin);
  if (stored_crc != actual_crc)
    throw ParseError(path + ": record checksum mismatch (file corrupt)");

  std::ifstream mf(manifest_path(path));
  if (!mf) throw IoError("cannot open " + manifest_path(path));
  nlohmann::json j;
  try {
    mf >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path(path) + ": " + e.what());
  }
  ds.manifest.split = j.at("split").get<std::string>();
  if (j.contains("seed")) ds.manifest.seed = j.at("seed").get<std::uint64_t>();
  if (j.at("record_count").get<std::uint64_t>() != ds.records.size() ||
      j.at("num_classes").get<std::uint32_t>() != ds.manifest.num_classes ||
      j.at("vocab_size").get<std::uint32_t>() != ds.manifest.vocab_size ||
      j.at("sentence_dim").get<std::uint32_t>() != ds.manifest.sentence_dim ||
      j.at("image_dim").get<std::uint32_t>() != ds.manifest.image_dim)
    throw ValidationError(manifest_path(path) + " disagrees with the record file header");

  validate_dataset(ds);
  return ds;
}

SplitResult split_dataset(const Dataset& ds, const SplitFractions& fr, std::uint64_t seed) {
  const double sum = fr.train + fr.val + fr.test;
  if (fr.train < 0 || fr.val < 0 || fr.test < 0 || std::fabs(sum - 1.0) > 1e-9)
    throw ConfigError("split fractions must be nonnegative and sum to 1, got " +
                      std::to_string(fr.train) + "/" + std::to_string(fr.val) + "/" +
                      std::to_string(fr.test));
  const std::array<double, 3> fracs{fr.train, fr.val, fr.test};
  const std::size_t positive_splits =
      static_cast<std::size_t>(std::count_if(fracs.begin(), fracs.end(),
                                             [](double v) { return v > 0.0; }));

  // Largest-remainder allocation of n records over the three splits;
  // remainder ties resolve in train/val/test order.
  auto allocate = [&](std::size_t n) {
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const double exact = fracs[s] * static_cast<double>(n);
      counts[s] = static_cast<std::size_t>(exact);
      remainder[s] = exact - static_cast<double>(counts[s]);
      assigned += counts[s];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) counts[order[i % 3]]++;
    return counts;
  };

  SplitResult out;
  std::array<std::vector<std::size_t>, 3> members;

  std::map<std::uint32_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    by_class[ds.records[i].label].push_back(i);

  std::vector<std::size_t> leftover;
  for (auto& [label, idx] : by_class) {
    if (idx.size() < positive_splits) {
      out.warnings.push_back("class " + std::to_string(label) + " has only " +
                             std::to_string(idx.size()) +
                             " records; assigned without stratification");
      leftover.insert(leftover.end(), idx.begin(), idx.end());
      continue;
    }
    auto rng = make_engine(derive_seed(seed, 1000 + label));
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto counts = allocate(idx.size());
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s)
      for (std::size_t c = 0; c < counts[s]; ++c) members[s].push_back(idx[pos++]);
  }
  if (!leftover.empty()) {
    auto rng = make_engine(derive_seed(seed, 999));
    std::shuffle(leftover.begin(), leftover.end(), rng);
    const auto counts = allocate(leftover.size());
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s)
      for (std::size_t c = 0; c < counts[s]; ++c) members[s].push_back(leftover[pos++]);
  }

  const char* names[3] = {"train", "val", "test"};
  Dataset* splits[3] = {&out.train, &out.val, &out.test};
  for (int s = 0; s < 3; ++s) {
    std::sort(members[s].begin(), members[s].end());
    splits[s]->manifest = ds.manifest;
    splits[s]->manifest.split = names[s];
    for (std::size_t i : members[s]) splits[s]->records.push_back(ds.records[i]);
    splits[s]->manifest.record_count = splits[s]->records.size();
  }
  return out;
}

}  // namespace scan
