// SPDX-License-Identifier: Apache-2.0
//
// Reference executor. Memory is a set of buffers living in host or device
// space; tensors are bound to buffers and kernels receive buffer addresses
// through an 8-byte-per-slot parameter image. Eager runs build that image from
// the current bindings; replays reuse the image recorded on the first
// execution of a captured graph, so frozen scalars and stale addresses
// behave as they would after a real stream capture.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "graphcap/capture.hpp"
#include "graphcap/ir.hpp"
#include "graphcap/kernels.hpp"
#include "graphcap/param_buffer.hpp"

namespace graphcap {

struct Buffer {
  Placement space = Placement::Device;
  std::vector<double> data;
  bool live = true;
  bool pinned = false;  // owned by a captured graph's pool; never released
};

class MachineState {
 public:
  explicit MachineState(std::uint64_t seed = 0) : rng_seed_(seed) {}

  std::uint32_t allocate(Placement space, std::size_t elems);
  // Releases the buffer unless it is pinned.
  void release(std::uint32_t buffer);
  void pin(std::uint32_t buffer) { buffers_.at(buffer).pinned = true; }

  Buffer& buffer(std::uint32_t id) { return buffers_.at(id); }
  const Buffer& buffer(std::uint32_t id) const { return buffers_.at(id); }
  std::size_t buffer_count() const { return buffers_.size(); }

  // Binds `t` to `buffer`, releasing the previously bound buffer.
  void bind(TensorId t, std::uint32_t buffer);
  void unbind(TensorId t);
  std::optional<std::uint32_t> binding(TensorId t) const;

  // Values of a bound tensor; throws MissingValue when unbound.
  const std::vector<double>& values(TensorId t) const;
  std::vector<double>& mutable_values(TensorId t);

  void set_scalar(ScalarId s, double v) { scalars_[s] = v; }
  double scalar(ScalarId s) const;

  std::uint64_t address_of(std::uint32_t buffer) const;
  // Decodes a host/device address and checks the buffer is still live.
  std::uint32_t resolve(std::uint64_t address) const;

  // Pointer cells: a global index per cell, pointing at a buffer.
  std::uint32_t new_cell();
  void set_cell(std::uint32_t cell, TensorId target, std::uint32_t buffer);
  std::uint32_t cell_buffer(std::uint32_t cell) const;
  TensorId cell_target(std::uint32_t cell) const;

  std::uint64_t rng_seed() const { return rng_seed_; }

 private:
  std::vector<Buffer> buffers_;
  std::map<TensorId, std::uint32_t> bindings_;
  std::map<ScalarId, double> scalars_;
  std::vector<std::pair<TensorId, std::uint32_t>> ptr_cells_;
  std::uint64_t rng_seed_;
};

// Per-iteration external values.
struct IterationValues {
  std::map<TensorId, std::vector<double>> tensors;
  std::map<ScalarId, double> scalars;
};
using InputSet = std::vector<IterationValues>;

// Values produced by a rule for iteration `iteration` (0-based). `key`
// separates independent uniform streams.
std::vector<double> generate_values(const ValueRule& rule, std::uint64_t elems, std::uint64_t seed,
                                    std::uint64_t key, std::uint64_t iteration);

// Uniform draw in [0, 1) from a counter-based hash; pure function of its inputs.
double counter_uniform(std::uint64_t seed, std::uint64_t key, std::uint64_t iteration, std::uint64_t element);

InputSet materialize_inputs(const Program& program, int iterations);

// Output key: (block id, tensor id). Values are snapshotted after the block's
// epilogue.
using OutputKey = std::pair<BlockId, TensorId>;
using OutputValues = std::map<OutputKey, std::vector<double>>;

struct RunResult {
  std::vector<OutputValues> outputs;  // one entry per iteration
  std::map<NodeId, std::uint64_t> exec_counts;
};

struct RunOptions {
  kernels::Backend backend = kernels::Backend::Serial;
  // Largest tensor the interpreter will materialize.
  std::uint64_t max_elems = std::uint64_t{1} << 24;
};

RunResult run_eager(const Program& program, const InputSet& inputs, const RunOptions& options = {});
RunResult run_eager(const Program& program, const RunOptions& options = {});

// Blocks present in `captured` replay their graph; all others run eagerly.
RunResult run_replay(const Program& program, const std::map<BlockId, CapturedGraph>& captured,
                     const InputSet& inputs, const RunOptions& options = {});
RunResult run_replay(const Program& program, const std::map<BlockId, CapturedGraph>& captured,
                     const RunOptions& options = {});

// Points every PointerCell at the buffer currently bound to its source
// tensor. `cells` maps graph-local cell ids to machine cell indices. Throws
// MissingInput when a source tensor has no value this iteration.
void refresh_pointers(const CapturedGraph& graph, const std::map<CellId, std::uint32_t>& cells,
                      MachineState& state);

struct Mismatch {
  std::size_t iteration = 0;
  OutputKey key;
  std::string detail;
};

// Relative tolerance 0 demands bit equality.
std::optional<Mismatch> compare_outputs(const RunResult& a, const RunResult& b, double rel_tol = 0.0);

}  // namespace graphcap
