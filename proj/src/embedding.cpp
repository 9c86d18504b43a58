#include "lpesql/embedding.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "lpesql/error.hpp"
#include "lpesql/text_util.hpp"

namespace lpesql {

namespace {

constexpr std::uint64_t kSignBasis = 0x84222325cbf29ce4ULL;

bool is_token_byte(unsigned char c) {
  return std::isalnum(c) != 0 || c >= 0x80;
}

UnitVector embed_remote(std::string_view text, const EncoderConfig& cfg) {
  auto url = split_url(cfg.endpoint);
  httplib::Client client(url.origin);
  client.set_connection_timeout(std::chrono::milliseconds(cfg.timeout_ms));
  client.set_read_timeout(std::chrono::milliseconds(cfg.timeout_ms));
  httplib::Headers headers;
  if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  nlohmann::json body = {{"model", cfg.model}, {"input", std::string(text)}};
  auto res = client.Post(url.path, headers, body.dump(), "application/json");
  if (!res) {
    throw EncoderError("embedding request failed: " +
                       httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw EncoderError("embedding endpoint returned status " +
                       std::to_string(res->status));
  }
  std::vector<double> raw;
  try {
    auto reply = nlohmann::json::parse(res->body);
    raw = reply.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw EncoderError(std::string("malformed embedding reply: ") + e.what());
  }
  if (raw.size() != cfg.dimension) {
    throw DimensionMismatch(cfg.dimension, raw.size());
  }
  return UnitVector::normalized(std::move(raw));
}

}  // namespace

UnitVector UnitVector::zeros(std::size_t dimension) {
  return UnitVector(std::vector<double>(dimension, 0.0));
}

UnitVector UnitVector::normalized(std::vector<double> raw) {
  double sq = 0.0;
  for (double x : raw) sq += x * x;
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (double& x : raw) x *= inv;
  }
  return UnitVector(std::move(raw));
}

UnitVector UnitVector::from_stored(std::vector<double> values) {
  return UnitVector(std::move(values));
}

bool UnitVector::is_zero() const {
  for (double x : values_) {
    if (x != 0.0) return false;
  }
  return true;
}

double UnitVector::norm() const {
  double sq = 0.0;
  for (double x : values_) sq += x * x;
  return std::sqrt(sq);
}

void EncoderConfig::validate() const {
  if (dimension == 0) throw ConfigError("encoder dimension must be positive");
  const bool remote_fields = !endpoint.empty() || !model.empty();
  if (mode == EncoderMode::kRemote && (endpoint.empty() || model.empty())) {
    throw ConfigError("remote encoder requires endpoint and model");
  }
  if (mode == EncoderMode::kHash && remote_fields) {
    throw ConfigError("hash encoder must not set endpoint or model");
  }
}

bool EncoderConfig::same_space(const EncoderConfig& other) const {
  return mode == other.mode && dimension == other.dimension &&
         endpoint == other.endpoint && model == other.model;
}

std::string to_string(EncoderMode mode) {
  return mode == EncoderMode::kHash ? "hash" : "remote";
}

EncoderMode encoder_mode_from_string(std::string_view s) {
  if (s == "hash") return EncoderMode::kHash;
  if (s == "remote") return EncoderMode::kRemote;
  throw ConfigError("unknown encoder mode: " + std::string(s));
}

std::vector<std::string> hash_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::uint64_t bucket_hash(std::string_view token) { return fnv1a64(token); }

std::uint64_t sign_hash(std::string_view token) {
  return fnv1a64(token, kSignBasis);
}

UnitVector embed(std::string_view text, const EncoderConfig& cfg) {
  cfg.validate();
  if (cfg.mode == EncoderMode::kRemote) return embed_remote(text, cfg);

  std::vector<double> acc(cfg.dimension, 0.0);
  for (const auto& token : hash_tokens(text)) {
    const auto bucket = bucket_hash(token) % cfg.dimension;
    acc[bucket] += (sign_hash(token) % 2 == 0) ? 1.0 : -1.0;
  }
  return UnitVector::normalized(std::move(acc));
}

double cosine_similarity(const UnitVector& a, const UnitVector& b) {
  if (a.dimension() != b.dimension()) {
    throw DimensionMismatch(a.dimension(), b.dimension());
  }
  auto av = a.values();
  auto bv = b.values();
  double dot = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) dot += av[i] * bv[i];
  return dot;
}

}  // namespace lpesql
