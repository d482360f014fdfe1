#pragma once

#include "clvstack/core.hpp"
#include "clvstack/parallel.hpp"
#include "clvstack/money.hpp"
#include "clvstack/timestamp.hpp"
#include "clvstack/csv.hpp"
#include "clvstack/ingest.hpp"
#include "clvstack/features.hpp"
#include "clvstack/clv.hpp"
#include "clvstack/tree.hpp"
#include "clvstack/ensemble.hpp"
#include "clvstack/linear.hpp"
#include "clvstack/stack.hpp"
#include "clvstack/report.hpp"
#include "clvstack/model_io.hpp"
#include "clvstack/experiment.hpp"
