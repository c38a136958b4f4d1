#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

namespace vpa {

using Json = nlohmann::json;
namespace fs = std::filesystem;

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool contains_icase(std::string_view haystack, std::string_view needle);
/// Fixed one-decimal rendering used for every timestamp label ("2.5").
std::string format_decimal1(double value);
/// Replaces every "{key}" occurrence with the mapped value; unknown keys are left as is.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars);

std::uint64_t fnv1a64(std::string_view data);
std::uint64_t splitmix64(std::uint64_t x);
/// Deterministic per-item seed from a run seed and a stable key.
std::uint64_t derive_seed(std::uint64_t base, std::string_view key, std::uint64_t index = 0);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string base64_encode(std::span<const std::uint8_t> bytes);

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view contents);

/// Blank lines are skipped; a malformed line raises IoError naming the line.
std::vector<Json> read_jsonl(const fs::path& path);
void write_jsonl(const fs::path& path, const std::vector<Json>& records);
void append_jsonl(const fs::path& path, const Json& record);

/// Extracts the first JSON object from model output, tolerating code fences
/// and surrounding prose. Returns nullopt when nothing parses.
std::optional<Json> extract_json_object(std::string_view text);

/// Appends records to a line-delimited file strictly in submission-slot
/// order, whatever order the slots complete in. Slots with no record
/// (nullopt) are skipped but still advance the cursor.
class OrderedJsonlWriter {
 public:
  OrderedJsonlWriter(fs::path path, std::size_t slots);

  void submit(std::size_t slot, std::optional<Json> record);
  std::size_t committed() const;

 private:
  void drain_locked();

  fs::path path_;
  std::size_t slots_;
  mutable std::mutex mu_;
  std::size_t next_ = 0;
  std::map<std::size_t, std::optional<Json>> pending_;
};

/// Runs fn(i) for i in [0, n) with at most `concurrency` calls in flight.
/// Once `stop` is raised no new items start. The first exception thrown by
/// fn is rethrown after all workers join.
template <class Fn>
void parallel_for(std::size_t n, std::size_t concurrency, Fn&& fn,
                  const std::atomic<bool>* stop = nullptr) {
  if (n == 0) return;
  if (concurrency <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      if (stop && stop->load()) return;
      fn(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (;;) {
      if (stop && stop->load()) return;
      {
        std::lock_guard lock(failure_mu);
        if (failure) return;
      }
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> workers;
    const std::size_t count = std::min(concurrency, n);
    workers.reserve(count);
    for (std::size_t w = 0; w < count; ++w) workers.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace vpa
