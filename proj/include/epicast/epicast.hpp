#pragma once

// Convenience include for the whole library.

#include "epicast/baselines.hpp"
#include "epicast/calendar.hpp"
#include "epicast/calibration.hpp"
#include "epicast/contacts.hpp"
#include "epicast/distributions.hpp"
#include "epicast/ee_model.hpp"
#include "epicast/harness.hpp"
#include "epicast/io.hpp"
#include "epicast/math.hpp"
#include "epicast/optim.hpp"
#include "epicast/scores.hpp"
