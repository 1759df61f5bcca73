#pragma once

#include "rae/classifiers.hpp"
#include "rae/config.hpp"
#include "rae/dataset.hpp"
#include "rae/diagnostics.hpp"
#include "rae/errors.hpp"
#include "rae/grad_check.hpp"
#include "rae/harness.hpp"
#include "rae/matrix.hpp"
#include "rae/model.hpp"
#include "rae/nn.hpp"
#include "rae/optimizer.hpp"
#include "rae/parallel.hpp"
#include "rae/random.hpp"
#include "rae/report.hpp"
#include "rae/schedule.hpp"
#include "rae/stats.hpp"
#include "rae/trainer.hpp"
