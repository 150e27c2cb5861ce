#pragma once

#include "bullbear/backtest.hpp"
#include "bullbear/csv.hpp"
#include "bullbear/dates.hpp"
#include "bullbear/errors.hpp"
#include "bullbear/ffbs.hpp"
#include "bullbear/filter.hpp"
#include "bullbear/forecast.hpp"
#include "bullbear/garch.hpp"
#include "bullbear/gibbs.hpp"
#include "bullbear/market_data.hpp"
#include "bullbear/math.hpp"
#include "bullbear/model.hpp"
#include "bullbear/optim.hpp"
#include "bullbear/parallel.hpp"
#include "bullbear/posterior_io.hpp"
#include "bullbear/regime.hpp"
#include "bullbear/rng.hpp"
#include "bullbear/rolling.hpp"
