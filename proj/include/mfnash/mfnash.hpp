// Umbrella header for the mean-field Nash prediction library.

#pragma once

#include "mfnash/block_pattern.hpp"
#include "mfnash/core.hpp"
#include "mfnash/datasets.hpp"
#include "mfnash/diagnostics.hpp"
#include "mfnash/encoders.hpp"
#include "mfnash/greedy.hpp"
#include "mfnash/io.hpp"
#include "mfnash/latent.hpp"
#include "mfnash/model.hpp"
#include "mfnash/nash_decentralized.hpp"
#include "mfnash/nash_full.hpp"
#include "mfnash/nash_reduced.hpp"
#include "mfnash/random.hpp"
#include "mfnash/sim.hpp"
#include "mfnash/spawner.hpp"
#include "mfnash/verify.hpp"
