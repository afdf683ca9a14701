#include "dstconf/replay.hpp"

#include <filesystem>
#include <fstream>
#include <utility>

namespace dstconf::llm {

ReplayBackend::ReplayBackend(std::string path, ReplayMode mode,
                             std::shared_ptr<LlmBackend> fallback)
    : path_(std::move(path)), mode_(mode), fallback_(std::move(fallback)) {
  if (mode_ == ReplayMode::Hybrid && !fallback_) {
    throw ConfigError("hybrid replay mode needs a fallback backend");
  }
  if (mode_ == ReplayMode::Strict && !std::filesystem::exists(path_)) {
    throw ConfigError("strict replay mode needs an existing cache file: " + path_);
  }
  load();
}

void ReplayBackend::load() {
  std::ifstream in(path_);
  if (!in) return;  // hybrid mode with no file yet
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("replay cache " + path_ + " line " + std::to_string(lineno) +
                       " is not valid JSON: " + e.what());
    }
    auto key = j.at("key").get<std::string>();
    auto exchange = j.at("exchange").get<LlmExchange>();
    if (recorded_model_id_.empty()) {
      recorded_model_id_ = exchange.request.model_id;
    }
    // Later lines win; hybrid appends never rewrite earlier ones.
    records_[key] = std::move(exchange);
  }
}

void ReplayBackend::append(const std::string& key, const LlmExchange& exchange) {
  std::ofstream out(path_, std::ios::app);
  if (!out) {
    throw ConfigError("cannot append to replay cache: " + path_);
  }
  nlohmann::json line{{"key", key}, {"exchange", exchange}};
  out << line.dump() << '\n';
}

LlmExchange ReplayBackend::complete(const LlmRequest& request) {
  const std::string key = record_replay_key(request);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = records_.find(key);
    if (it != records_.end()) {
      ++hits_;
      return it->second;
    }
    ++misses_;
  }
  if (mode_ == ReplayMode::Strict) {
    throw ReplayMissError("request not in replay cache " + path_, key);
  }
  LlmExchange exchange = fallback_->complete(request);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    append(key, exchange);
    records_[key] = exchange;
  }
  return exchange;
}

std::string ReplayBackend::model_id() const {
  if (fallback_) return fallback_->model_id();
  // Strict mode has no inner backend; reuse the recorded model so requests
  // built from model_id() (notably the score_string default) digest to the
  // same replay keys they were recorded under.
  if (!recorded_model_id_.empty()) return recorded_model_id_;
  return "replay";
}

std::size_t ReplayBackend::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return records_.size();
}

std::size_t ReplayBackend::hits() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return hits_;
}

std::size_t ReplayBackend::misses() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return misses_;
}

}  // namespace dstconf::llm
