#include "byzef/protocol.hpp"

#include <string>

#include "byzef/loss.hpp"

namespace byzef {

namespace {

void check_eta(double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) {
    throw ConfigError("momentum eta must lie in (0, 1], got " + std::to_string(eta));
  }
}

void check_messages(const ServerState& server, std::span<const SparseDelta> deltas) {
  if (deltas.size() != server.shadows.size()) {
    throw ProtocolError("server expected " + std::to_string(server.shadows.size()) +
                        " messages, got " + std::to_string(deltas.size()));
  }
  for (const auto& d : deltas) {
    if (d.dim != server.x.size()) throw ProtocolError("message dimension does not match model");
  }
}

}  // namespace

DenseVector stochastic_grad(WorkerState& state, std::span<const double> x) {
  if (state.batch_size == kFullBatch) {
    return logistic_grad(x, std::span<const Example>(state.shard->examples), state.lambda,
                         state.flip_labels);
  }
  const Batch batch = sample_batch(*state.shard, state.batch_size, state.rng);
  return logistic_grad(x, batch, state.lambda, state.flip_labels);
}

std::pair<WorkerState, DenseVector> worker_init(std::size_t id, std::shared_ptr<const Shard> shard,
                                                std::span<const double> x0,
                                                const WorkerOptions& options, RngStream rng) {
  check_eta(options.eta);
  if (!shard || shard->empty()) throw StateError("worker " + std::to_string(id) + ": empty shard");
  if (options.compressor.k < 1 || options.compressor.k > x0.size()) {
    throw ConfigError("compressor k must lie in [1, d]");
  }
  WorkerState state;
  state.id = id;
  state.shard = std::move(shard);
  state.eta = options.eta;
  state.compressor = options.compressor;
  state.rng = rng;
  state.lambda = options.lambda;
  state.batch_size = options.batch_size;
  state.flip_labels = options.flip_labels;

  state.last_grad = stochastic_grad(state, x0);
  state.v = state.last_grad;
  state.g = state.last_grad;
  DenseVector g0 = state.g;
  return {std::move(state), std::move(g0)};
}

SparseDelta worker_round(WorkerState& state, std::span<const double> x_new) {
  require_same_dim(state.dim(), x_new.size(), "worker_round");
  state.last_grad = stochastic_grad(state, x_new);
  const double keep = 1.0 - state.eta;
  for (std::size_t j = 0; j < state.v.size(); ++j) {
    state.v[j] = keep * state.v[j] + state.eta * state.last_grad[j];
  }
  const DenseVector diff = subtract(state.v, state.g);
  SparseDelta c = compress(state.compressor, diff, state.rng);
  add_into(state.g, c);
  return c;
}

SparseDelta brcsgd_worker_round(WorkerState& state, std::span<const double> x_new) {
  if (!state.compressor.unbiased()) {
    throw ConfigError("BR-CSGD requires an unbiased compressor (randk or identity)");
  }
  require_same_dim(state.dim(), x_new.size(), "brcsgd_worker_round");
  state.last_grad = stochastic_grad(state, x_new);
  return compress(state.compressor, state.last_grad, state.rng);
}

ServerState ServerState::create(DenseVector x0, std::size_t n_workers, double gamma,
                                AggregatorSpec aggregator) {
  if (!(gamma >= 0.0)) throw ConfigError("step size gamma must be nonnegative");
  ServerState s;
  s.shadows.assign(n_workers, DenseVector(x0.size(), 0.0));
  s.x = std::move(x0);
  s.gamma = gamma;
  s.aggregator = aggregator;
  s.aggregator.validate(n_workers);
  return s;
}

const DenseVector& server_round(ServerState& server, std::span<const SparseDelta> deltas) {
  check_messages(server, deltas);
  for (std::size_t i = 0; i < deltas.size(); ++i) add_into(server.shadows[i], deltas[i]);
  server.last_aggregate = aggregate(server.aggregator, server.shadows);
  axpy(-server.gamma, server.last_aggregate, server.x);
  ++server.round;
  return server.x;
}

const DenseVector& brcsgd_server_round(ServerState& server, std::span<const SparseDelta> messages) {
  check_messages(server, messages);
  std::vector<DenseVector> received;
  received.reserve(messages.size());
  for (const auto& m : messages) received.push_back(densify(m));
  server.last_aggregate = aggregate(server.aggregator, received);
  axpy(-server.gamma, server.last_aggregate, server.x);
  ++server.round;
  return server.x;
}

}  // namespace byzef
