#ifndef PDMPVOL_PDMPVOL_HPP
#define PDMPVOL_PDMPVOL_HPP

#include "pdmpvol/benchmark.hpp"
#include "pdmpvol/bps.hpp"
#include "pdmpvol/diagnostics.hpp"
#include "pdmpvol/log_sum_exp.hpp"
#include "pdmpvol/models.hpp"
#include "pdmpvol/polytope.hpp"
#include "pdmpvol/polytope_io.hpp"
#include "pdmpvol/random.hpp"
#include "pdmpvol/report.hpp"
#include "pdmpvol/volume.hpp"

#endif  // PDMPVOL_PDMPVOL_HPP
