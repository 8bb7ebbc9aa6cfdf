#pragma once

#include "small/dataset.hpp"
#include "small/dnf.hpp"
#include "small/harness.hpp"
#include "small/kmeans.hpp"
#include "small/losses.hpp"
#include "small/model.hpp"
#include "small/projections.hpp"
#include "small/saddle.hpp"
#include "small/solver.hpp"
