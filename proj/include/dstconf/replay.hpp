#pragma once

/**
 * Record/replay cache over any LlmBackend.
 *
 * The cache file is JSONL; each line is {"key": "<16-hex>", "exchange": {...}}
 * with the key produced by record_replay_key() over the request. Replaying a
 * request returns the stored exchange byte-for-byte, which makes evaluation
 * runs reproducible without network access.
 *
 * Modes:
 *   Strict: every request must hit the cache; a miss throws ReplayMissError.
 *   Hybrid: a miss falls through to the wrapped backend and the fresh
 *           exchange is appended to the cache file.
 */

#include "dstconf/llm.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace dstconf::llm {

enum class ReplayMode { Strict, Hybrid };

class ReplayBackend : public LlmBackend {
public:
  /// Strict mode requires the file to exist; hybrid mode requires a fallback
  /// backend and creates the file on first append.
  ReplayBackend(std::string path, ReplayMode mode,
                std::shared_ptr<LlmBackend> fallback = nullptr);

  LlmExchange complete(const LlmRequest& request) override;
  std::string model_id() const override;
  std::string name() const override { return "replay"; }

  std::size_t size() const;
  std::size_t hits() const;
  std::size_t misses() const;

private:
  void load();
  void append(const std::string& key, const LlmExchange& exchange);

  std::string path_;
  ReplayMode mode_;
  std::shared_ptr<LlmBackend> fallback_;
  std::string recorded_model_id_;  // first recorded model; see model_id()

  mutable std::mutex mutex_;
  std::map<std::string, LlmExchange> records_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

}  // namespace dstconf::llm
