#pragma once

#include "jointrait/archive.hpp"
#include "jointrait/csv_io.hpp"
#include "jointrait/data.hpp"
#include "jointrait/diagnostics.hpp"
#include "jointrait/error.hpp"
#include "jointrait/evaluation.hpp"
#include "jointrait/latent_trait.hpp"
#include "jointrait/longitudinal.hpp"
#include "jointrait/model_spec.hpp"
#include "jointrait/parameters.hpp"
#include "jointrait/posterior.hpp"
#include "jointrait/prediction.hpp"
#include "jointrait/prepared.hpp"
#include "jointrait/priors.hpp"
#include "jointrait/sampler.hpp"
#include "jointrait/simulation.hpp"
#include "jointrait/stats.hpp"
#include "jointrait/survival.hpp"
