#pragma once

#include <ensemblex/core.hpp>
#include <ensemblex/combiners.hpp>
#include <ensemblex/superlearner.hpp>
#include <ensemblex/predict.hpp>
#include <ensemblex/metrics.hpp>
#include <ensemblex/cvharness.hpp>
#include <ensemblex/synthgen.hpp>
