#pragma once

#include <cstdint>

#include "dghif/tensorcore/grad_check.hpp"
#include "dghif/trainpipe/model.hpp"

namespace dghif::train {

/// Four users, five posts, four relations; user 3 has no graph presence.
Dataset four_user_dataset();

/// Tiny architecture sized for finite-difference checks (no dropout).
ModelConfig four_user_model_config();

/// Finite-difference check of the full joint loss (text encoder, graph
/// convolution, gated fusion, risk head, relational loss and lambda) on the
/// four-user instance, in 64-bit precision.
tc::GradCheckReport joint_loss_grad_check(LambdaMode lambda_mode, std::uint64_t seed,
                                          const tc::GradCheckOptions& options = {
                                              .step = 1e-5, .tolerance = 1e-4, .floor = 1e-4, .max_coords = 12});

}  // namespace dghif::train
