#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace scan {

// Reserved ingredient token id mapped to the all-zero embedding row.
inline constexpr std::uint32_t kPaddingTokenId = 0;

// One paired sample: a recipe (ingredient tokens + precomputed instruction
// sentence vectors) and the matching image feature vector. Feature payloads
// are kept at disk precision (f32) and widened to double when they enter
// tensors.
struct FoodPairRecord {
  std::uint64_t pair_id = 0;
  std::uint32_t label = 0;  // food category, in [0, num_classes)
  std::vector<std::uint32_t> tokens;
  std::uint32_t n_sentences = 0;
  std::vector<float> sentences;  // n_sentences x sentence_dim, row-major
  std::vector<float> image;      // image_dim

  bool operator==(const FoodPairRecord&) const = default;
};

struct DatasetManifest {
  std::uint32_t format_version = 1;
  std::string split = "all";
  std::uint64_t record_count = 0;
  std::uint32_t num_classes = 0;
  std::uint32_t vocab_size = 0;
  std::uint32_t sentence_dim = 0;
  std::uint32_t image_dim = 0;
  std::optional<std::uint64_t> seed;  // set when the data is synthetic

  bool operator==(const DatasetManifest&) const = default;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<FoodPairRecord> records;

  std::size_t size() const { return records.size(); }
};

// Generator settings for the synthetic paired corpus. Per class k a latent
// center c_k is drawn; each pair adds its own latent u, and both modalities
// observe fixed linear maps of (c_k + u) plus isotropic noise. Ingredient
// tokens mix a class-specific pool with a shared common-token pool so that
// uninformative tokens exist for attention to discount.
struct SyntheticConfig {
  std::uint32_t num_classes = 20;
  std::uint32_t pairs_per_class = 10;
  std::uint32_t latent_dim = 16;
  double noise_sigma = 0.1;
  double pair_latent_scale = 0.5;  // std-dev of the per-pair latent u
  std::uint32_t vocab_size = 120;
  std::uint32_t tokens_min = 4;
  std::uint32_t tokens_max = 12;
  std::uint32_t sentences_min = 2;
  std::uint32_t sentences_max = 5;
  double common_token_fraction = 0.5;
  std::uint32_t sentence_dim = 24;
  std::uint32_t image_dim = 24;
  std::uint64_t seed = 7;

  void validate() const;  // throws ConfigError
};

Dataset synthetic_generate(const SyntheticConfig& cfg);

// Checks every record invariant (label range, vocabulary range, payload
// sizes, finite values, unique pair ids). Throws ValidationError naming the
// offending pair id.
void validate_dataset(const Dataset& ds);

// Binary record file plus JSON sidecar manifest at <path>.manifest.json.
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

struct SplitFractions {
  double train = 0.7;
  double val = 0.15;
  double test = 0.15;
};

struct SplitResult {
  Dataset train, val, test;
  std::vector<std::string> warnings;  // classes that fell back to unstratified
};

// Seed-deterministic, class-stratified partition. Fractions must sum to 1.
SplitResult split_dataset(const Dataset& ds, const SplitFractions& fractions,
                          std::uint64_t seed);

}  // namespace scan
