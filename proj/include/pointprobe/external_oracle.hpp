#pragma once

#include <atomic>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "pointprobe/model.hpp"

namespace pointprobe {

/// Newline-delimited JSON over a subprocess's stdin/stdout:
///   handshake (model -> client):  {"classes": C}
///   request   (client -> model):  {"id": <int>, "points": [[x,y,z], ...]}
///   response  (model -> client):  {"id": <int>, "probs": [p_0, ..., p_{C-1}]}
/// One object per line; responses may arrive out of order.
struct ExternalOracleConfig {
  std::string command;    // run through /bin/sh -c
  int procs = 1;          // subprocess pool size
  int timeout_ms = 30000; // per evaluate() call
};

/// Black-box model adapter over the wire protocol. Wire access is
/// serialized per subprocess; concurrent evaluate() calls are spread over
/// the pool round-robin.
class ExternalOracle : public ModelOracle {
 public:
  explicit ExternalOracle(ExternalOracleConfig cfg);
  ~ExternalOracle() override;

  ExternalOracle(const ExternalOracle&) = delete;
  ExternalOracle& operator=(const ExternalOracle&) = delete;

  int num_classes() const override { return classes_; }
  std::vector<ProbVector> evaluate(const std::vector<PointCloud>& batch) const override;

 private:
  struct Subprocess;
  std::vector<std::unique_ptr<Subprocess>> pool_;
  mutable std::atomic<std::size_t> next_{0};
  int classes_ = 0;
  int timeout_ms_ = 30000;
};

/// Serves a built-in model over the same protocol (used by `pointprobe
/// serve`). Returns when stdin closes.
void run_oracle_server(const BuiltinClassifier& model, std::istream& in,
                       std::ostream& out);

}  // namespace pointprobe
