#pragma once

#include "calspread/hawkes/fit.hpp"
#include "calspread/hawkes/forecast.hpp"
#include "calspread/hawkes/likelihood.hpp"
#include "calspread/hawkes/model.hpp"
#include "calspread/hawkes/optimize.hpp"
#include "calspread/hawkes/simulate.hpp"
