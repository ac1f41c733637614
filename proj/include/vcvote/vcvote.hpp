#pragma once

#include "annotation.hpp"
#include "binary_io.hpp"
#include "concepts.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "detection.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "feature_map.hpp"
#include "grid.hpp"
#include "image.hpp"
#include "io.hpp"
#include "lattice.hpp"
#include "likelihood.hpp"
#include "model.hpp"
#include "model_io.hpp"
#include "multiscale.hpp"
#include "occlusion.hpp"
#include "pipeline.hpp"
#include "spatial.hpp"
#include "synthgen.hpp"
#include "training.hpp"
#include "voting.hpp"
