// Serial reference for the replication kernel. Kept for tests and the
// benchmark; must produce the same bits as run_block.

#include "bsnlr/mc.hpp"
#include "mc_detail.hpp"

namespace bsnlr::mc {

ReplicationBlock run_block_serial(const SimConfig& config, std::size_t n_index, const MatrixXd& x) {
  ReplicationBlock out = detail::empty_block(config);
  for (int rep = 0; rep < config.reps; ++rep) detail::run_one(config, n_index, x, rep, out);
  return out;
}

SimReport run_simulation_serial(const SimConfig& config) {
  config.validate();
  std::vector<ReplicationBlock> blocks;
  for (std::size_t k = 0; k < config.n_grid.size(); ++k)
    blocks.push_back(run_block_serial(config, k, design(config, k)));
  return detail::assemble(config, blocks);
}

}  // namespace bsnlr::mc
