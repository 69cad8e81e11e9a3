#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace scriptalign {

// Raised when an input record, config, or file violates its contract.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a pipeline stage fails; carries the stage name for diagnostics.
class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

std::vector<std::string> split_ws(std::string_view text);
std::vector<std::string> split_on(std::string_view text, char sep);
std::string trim(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Splits a UTF-8 string into codepoint-sized chunks. Invalid bytes come back
// as single-byte chunks so no input is ever rejected here.
std::vector<std::string> utf8_chars(std::string_view text);

// FNV-1a 64-bit, used for artifact manifests and seed derivation.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull);
std::string hex64(std::uint64_t value);

// Mixes several integers into one sub-seed so per-record RNG streams stay
// independent of record content.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
std::vector<std::string> read_lines(const std::string& path);

std::string format_fixed(double value, int decimals);

}  // namespace scriptalign
