// Umbrella header for the reduced-order diffusion-reaction surrogate toolkit.
#pragma once

#include "podsur/config.hpp"
#include "podsur/fem.hpp"
#include "podsur/io.hpp"
#include "podsur/linalg.hpp"
#include "podsur/mesh.hpp"
#include "podsur/mlp.hpp"
#include "podsur/pipeline.hpp"
#include "podsur/pod.hpp"
#include "podsur/rng.hpp"
#include "podsur/sampling.hpp"
#include "podsur/snapshots.hpp"
#include "podsur/sparse.hpp"
#include "podsur/train_lm.hpp"
