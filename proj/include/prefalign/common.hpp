#pragma once

#include <cstdint>
#include <stdexcept>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace prefalign {

// Error taxonomy. The CLI maps these onto exit codes 2 (validation),
// 3 (I/O) and 4 (provider).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

// Internal consistency failure, e.g. an embedding dimension changing mid-run.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class ProviderError : public Error {
 public:
  ProviderError(std::string kind, std::string model_id, int attempts,
                const std::string& what)
      : Error(kind + " provider '" + model_id + "' failed after " +
              std::to_string(attempts) + " attempt(s): " + what),
        kind_(std::move(kind)),
        model_id_(std::move(model_id)),
        attempts_(attempts) {}

  const std::string& kind() const noexcept { return kind_; }
  const std::string& model_id() const noexcept { return model_id_; }
  int attempts() const noexcept { return attempts_; }

 private:
  std::string kind_;
  std::string model_id_;
  int attempts_;
};

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Maximal runs of alphanumerics and apostrophes.
std::vector<std::string> split_words(std::string_view text);

std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);
std::string hash_file(const std::string& path);

// Shortest decimal that parses back to the same double.
std::string format_shortest(double v);
// Whole-string parse; nullopt on junk or trailing characters.
std::optional<double> parse_double(std::string_view s);

std::string csv_quote(std::string_view field);
// Splits one CSV record (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> csv_split(std::string_view line);
// Non-empty lines, CR stripped.
std::vector<std::string_view> split_lines(std::string_view text);

}  // namespace prefalign
