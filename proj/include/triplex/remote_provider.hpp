#pragma once

// Client for the embedding service protocol:
//   GET  /models -> {"models":[{"name":..., "dim":..., ...}]}
//   POST /embed  {"model":..., "texts":[...]} -> {"model":..., "dim":N, "vectors":[[...]]}
// Vectors come back unnormalized; embed_corpus normalizes them.

#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "triplex/embed.hpp"
#include "triplex/error.hpp"

namespace triplex {

struct RemoteOptions {
  std::size_t batch_size = 64;
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{250};
  std::chrono::seconds timeout{120};
};

class RemoteProvider final : public EmbeddingProvider {
 public:
  RemoteProvider(std::string endpoint, std::string model, RemoteOptions opts = {})
      : endpoint_(std::move(endpoint)), model_(std::move(model)), opts_(opts) {
    if (opts_.batch_size == 0) throw ConfigError("remote provider batch size must be positive");
    if (opts_.max_attempts < 1) throw ConfigError("remote provider needs at least one attempt");
    while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
    dim_ = lookup_dim();
  }

  std::string name() const override { return "remote:" + model_; }
  std::size_t dim() const override { return dim_; }
  const std::string& endpoint() const noexcept { return endpoint_; }

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (std::size_t start = 0, batch = 0; start < texts.size(); start += opts_.batch_size, ++batch) {
      const std::size_t end = std::min(texts.size(), start + opts_.batch_size);
      const std::vector<std::string> chunk(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                           texts.begin() + static_cast<std::ptrdiff_t>(end));
      auto vectors = embed_batch(chunk, batch);
      for (auto& v : vectors) out.push_back(std::move(v));
    }
    return out;
  }

 private:
  httplib::Client client() const {
    httplib::Client c(endpoint_);
    c.set_connection_timeout(opts_.timeout);
    c.set_read_timeout(opts_.timeout);
    c.set_write_timeout(opts_.timeout);
    return c;
  }

  // Runs `attempt` until it succeeds or fails non-retriably; transport errors
  // and retriable statuses back off exponentially.
  template <class Fn>
  auto with_retry(std::size_t batch, Fn&& attempt) const {
    auto delay = opts_.initial_backoff;
    for (int i = 1;; ++i) {
      try {
        return attempt();
      } catch (const ProviderError& e) {
        if (!e.retriable() || i >= opts_.max_attempts)
          throw ProviderError(std::string(e.what()) + " (after " + std::to_string(i) +
                                  " attempt" + (i == 1 ? "" : "s") + ")",
                              false, batch);
        std::this_thread::sleep_for(delay);
        delay *= 2;
      }
    }
  }

  static bool retriable_status(int status) { return status == 429 || status >= 500; }

  std::size_t lookup_dim() const {
    const nlohmann::json models = with_retry(0, [&] {
      auto c = client();
      auto res = c.Get("/models");
      if (!res)
        throw ProviderError("GET " + endpoint_ + "/models failed: " + httplib::to_string(res.error()),
                            true, 0);
      if (res->status != 200)
        throw ProviderError("GET /models returned HTTP " + std::to_string(res->status),
                            retriable_status(res->status), 0);
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("GET /models: malformed JSON: ") + e.what(), false, 0);
      }
    });
    if (models.contains("models") && models["models"].is_array()) {
      for (const auto& m : models["models"]) {
        if (m.value("name", std::string{}) == model_) {
          const auto d = m.value("dim", std::int64_t{0});
          if (d <= 0) throw ContractError("service advertises non-positive dim for " + model_);
          return static_cast<std::size_t>(d);
        }
      }
    }
    throw ProviderError("service at " + endpoint_ + " does not serve model '" + model_ + "'",
                        false, 0);
  }

  std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts,
                                               std::size_t batch) const {
    const std::string body = nlohmann::json{{"model", model_}, {"texts", texts}}.dump();
    const nlohmann::json reply = with_retry(batch, [&] {
      auto c = client();
      auto res = c.Post("/embed", body, "application/json");
      if (!res)
        throw ProviderError("POST " + endpoint_ + "/embed failed on batch " +
                                std::to_string(batch) + ": " + httplib::to_string(res.error()),
                            true, batch);
      if (res->status != 200)
        throw ProviderError("POST /embed returned HTTP " + std::to_string(res->status) +
                                " on batch " + std::to_string(batch),
                            retriable_status(res->status), batch);
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("POST /embed: malformed JSON: ") + e.what(), false, batch);
      }
    });

    const auto dim = reply.value("dim", std::int64_t{-1});
    if (dim != static_cast<std::int64_t>(dim_))
      throw ContractError("dimension drift on batch " + std::to_string(batch) + ": service said " +
                          std::to_string(dim) + ", expected " + std::to_string(dim_));
    if (!reply.contains("vectors") || !reply["vectors"].is_array())
      throw ContractError("POST /embed reply has no vectors array");
    const auto& vs = reply["vectors"];
    if (vs.size() != texts.size())
      throw ContractError("service returned " + std::to_string(vs.size()) + " vectors for " +
                          std::to_string(texts.size()) + " texts on batch " +
                          std::to_string(batch));
    std::vector<std::vector<double>> out;
    out.reserve(vs.size());
    for (const auto& v : vs) {
      auto row = v.get<std::vector<double>>();
      if (row.size() != dim_)
        throw ContractError("dimension drift on batch " + std::to_string(batch) + ": vector of " +
                            std::to_string(row.size()) + ", expected " + std::to_string(dim_));
      out.push_back(std::move(row));
    }
    return out;
  }

  std::string endpoint_;
  std::string model_;
  RemoteOptions opts_;
  std::size_t dim_ = 0;
};

}  // namespace triplex
