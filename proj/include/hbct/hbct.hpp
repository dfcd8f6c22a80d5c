#pragma once

#include "hbct/errors.hpp"
#include "hbct/numeric.hpp"
#include "hbct/autodiff.hpp"
#include "hbct/manifold.hpp"
#include "hbct/losses.hpp"
#include "hbct/rng.hpp"
#include "hbct/encoder.hpp"
#include "hbct/dataset.hpp"
#include "hbct/training.hpp"
#include "hbct/evaluation.hpp"
#include "hbct/io.hpp"
#include "hbct/config.hpp"
#include "hbct/scenario.hpp"
#include "hbct/plots.hpp"
