#pragma once

#include "beamparse/config.hpp"
#include "beamparse/errors.hpp"
#include "beamparse/feature_model.hpp"
#include "beamparse/model_io.hpp"
#include "beamparse/network.hpp"
#include "beamparse/perceptron.hpp"
#include "beamparse/trainer.hpp"
#include "beamparse/transition_system.hpp"
#include "beamparse/treebank.hpp"
#include "beamparse/tritrain.hpp"
