#pragma once

#include "drolab/asymptotics.hpp"
#include "drolab/box.hpp"
#include "drolab/box_minimizer.hpp"
#include "drolab/divergences.hpp"
#include "drolab/dro_family.hpp"
#include "drolab/erm.hpp"
#include "drolab/errors.hpp"
#include "drolab/field.hpp"
#include "drolab/ks_test.hpp"
#include "drolab/line_search.hpp"
#include "drolab/loss_models.hpp"
#include "drolab/measures.hpp"
#include "drolab/phi_dro.hpp"
#include "drolab/random.hpp"
#include "drolab/sensitivity.hpp"
#include "drolab/wasserstein_dro.hpp"
