#pragma once

#include <vector>

#include "bsnlr/mc.hpp"

namespace bsnlr::mc::detail {

ReplicationBlock empty_block(const SimConfig& config);
void run_one(const SimConfig& config, std::size_t n_index, const MatrixXd& x, int rep, ReplicationBlock& out);
SimReport assemble(const SimConfig& config, const std::vector<ReplicationBlock>& blocks);

}  // namespace bsnlr::mc::detail
