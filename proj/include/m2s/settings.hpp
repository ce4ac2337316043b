#pragma once

#include <string>

#include "m2s/config.hpp"
#include "m2s/distill.hpp"
#include "m2s/error.hpp"
#include "m2s/fusion.hpp"
#include "m2s/synthetic.hpp"

namespace m2s {

// Keys: fusion.hard_classes, fusion.window, fusion.moving_threshold,
// fusion.register_moving, icp.max_iterations, icp.convergence_tol,
// icp.max_correspondence_dist.
inline void apply_config(const KeyValueConfig& cfg, FusionConfig& out) {
  if (auto list = cfg.get_list("fusion.hard_classes")) {
    out.hard_classes.clear();
    for (double v : *list) {
      if (v < 0 || v > 0xFFFF || v != static_cast<double>(static_cast<int>(v)))
        throw Error(ErrorKind::MalformedConfig, "fusion.hard_classes: bad class id");
      out.hard_classes.insert(static_cast<std::uint16_t>(v));
    }
  }
  cfg.read("fusion.window", out.window);
  cfg.read("fusion.moving_threshold", out.moving_threshold);
  if (auto v = cfg.get_int("fusion.register_moving")) out.register_moving = *v != 0;
  cfg.read("icp.max_iterations", out.registration.max_iterations);
  cfg.read("icp.convergence_tol", out.registration.convergence_tol);
  cfg.read("icp.max_correspondence_dist", out.registration.max_correspondence_dist);
  out.validate();
}

// Keys: distill.T, distill.P, distill.betas (four values), distill.affinity
// (cosine | squared).
inline void apply_config(const KeyValueConfig& cfg, DistillConfig& out) {
  cfg.read("distill.T", out.smooth_l1_T);
  cfg.read("distill.P", out.temperature_P);
  if (auto b = cfg.get_list("distill.betas")) {
    if (b->size() != 4) throw Error(ErrorKind::MalformedConfig, "distill.betas needs four values");
    for (std::size_t i = 0; i < 4; ++i) out.betas[i] = (*b)[i];
  }
  if (auto a = cfg.get_string("distill.affinity")) {
    if (*a == "cosine")
      out.affinity_norm = AffinityNorm::Cosine;
    else if (*a == "squared")
      out.affinity_norm = AffinityNorm::SquaredLiteral;
    else
      throw Error(ErrorKind::MalformedConfig, "distill.affinity must be cosine or squared");
  }
  out.validate();
}

// Keys: synthetic.scans, synthetic.ego_speed, synthetic.ego_yaw_rate,
// synthetic.ground_points, synthetic.noise_sigma.
inline void apply_config(const KeyValueConfig& cfg, SyntheticConfig& out) {
  cfg.read("synthetic.scans", out.num_scans);
  cfg.read("synthetic.ego_speed", out.ego_speed);
  cfg.read("synthetic.ego_yaw_rate", out.ego_yaw_rate);
  cfg.read("synthetic.ground_points", out.ground_points);
  cfg.read("synthetic.noise_sigma", out.noise_sigma);
  out.validate();
}

}  // namespace m2s
