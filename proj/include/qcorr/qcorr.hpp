#pragma once

#include "qcorr/analysis.hpp"
#include "qcorr/config.hpp"
#include "qcorr/errors.hpp"
#include "qcorr/generator.hpp"
#include "qcorr/interferometer.hpp"
#include "qcorr/io.hpp"
#include "qcorr/loss_estimation.hpp"
#include "qcorr/noise_model.hpp"
#include "qcorr/parallel.hpp"
#include "qcorr/reproduce.hpp"
