#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lpesql {

inline constexpr std::size_t kDefaultDimension = 384;

/// Fixed-length vector whose L2 norm is 1, or which is exactly all zeros.
class UnitVector {
 public:
  UnitVector() = default;

  /// All-zero vector of the given dimension.
  static UnitVector zeros(std::size_t dimension);

  /// Normalizes `raw`; an all-zero input stays all-zero.
  static UnitVector normalized(std::vector<double> raw);

  /// Adopts values that are already unit-norm (or zero), e.g. on load.
  static UnitVector from_stored(std::vector<double> values);

  std::size_t dimension() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  bool is_zero() const;
  double norm() const;

  friend bool operator==(const UnitVector&, const UnitVector&) = default;

 private:
  explicit UnitVector(std::vector<double> v) : values_(std::move(v)) {}
  std::vector<double> values_;
};

enum class EncoderMode { kHash, kRemote };

struct EncoderConfig {
  EncoderMode mode = EncoderMode::kHash;
  std::size_t dimension = kDefaultDimension;
  // Remote mode only.
  std::string endpoint;
  std::string model;
  std::string api_key_env = "LPESQL_EMBED_API_KEY";
  int timeout_ms = 30000;

  /// Throws ConfigError when the invariants do not hold.
  void validate() const;

  /// Identity of the vector space: mode, dimension, endpoint and model.
  bool same_space(const EncoderConfig& other) const;
};

std::string to_string(EncoderMode mode);
EncoderMode encoder_mode_from_string(std::string_view s);

/// Embeds `text`. Hash mode is a signed hashed bag of words; remote mode
/// calls an embeddings endpoint and normalizes the reply.
UnitVector embed(std::string_view text, const EncoderConfig& cfg);

/// Dot product of two unit-or-zero vectors.
double cosine_similarity(const UnitVector& a, const UnitVector& b);

/// Tokens used by the hash encoder: lowercase runs of alphanumeric bytes
/// (bytes >= 0x80 count as alphanumeric so UTF-8 words stay intact).
std::vector<std::string> hash_tokens(std::string_view text);

/// The two per-token hashes of the hash encoder.
std::uint64_t bucket_hash(std::string_view token);
std::uint64_t sign_hash(std::string_view token);

}  // namespace lpesql
