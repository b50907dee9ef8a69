#pragma once

// Umbrella header for the whole library.

#include "mmgr/checkpoint.hpp"
#include "mmgr/config.hpp"
#include "mmgr/consensus.hpp"
#include "mmgr/csv.hpp"
#include "mmgr/error.hpp"
#include "mmgr/flow.hpp"
#include "mmgr/fusion.hpp"
#include "mmgr/image_io.hpp"
#include "mmgr/layers.hpp"
#include "mmgr/metrics.hpp"
#include "mmgr/network.hpp"
#include "mmgr/optim.hpp"
#include "mmgr/parallel.hpp"
#include "mmgr/rng.hpp"
#include "mmgr/streams.hpp"
#include "mmgr/synth.hpp"
#include "mmgr/tensor.hpp"
#include "mmgr/video.hpp"
