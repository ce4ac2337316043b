#pragma once

#include "m2s/class_map.hpp"
#include "m2s/config.hpp"
#include "m2s/distill.hpp"
#include "m2s/error.hpp"
#include "m2s/fusion.hpp"
#include "m2s/geometry.hpp"
#include "m2s/gradcheck.hpp"
#include "m2s/instance_db.hpp"
#include "m2s/instance_gen.hpp"
#include "m2s/kitti_io.hpp"
#include "m2s/metrics.hpp"
#include "m2s/nearest_neighbor.hpp"
#include "m2s/point_cloud.hpp"
#include "m2s/random.hpp"
#include "m2s/registration.hpp"
#include "m2s/synthetic.hpp"
#include "m2s/toynet.hpp"
#include "m2s/toy_pipeline.hpp"
#include "m2s/settings.hpp"
