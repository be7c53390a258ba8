#pragma once

#include "cpseg/error.hpp"
#include "cpseg/specialfn.hpp"
#include "cpseg/stats.hpp"
#include "cpseg/pvalue.hpp"
#include "cpseg/segment.hpp"
#include "cpseg/confidence.hpp"
#include "cpseg/power.hpp"
#include "cpseg/expfam.hpp"
#include "cpseg/sim.hpp"
#include "cpseg/io.hpp"
