#pragma once

#include "qcorr/covariance.hpp"
#include "qcorr/fit.hpp"
#include "qcorr/spectral.hpp"
