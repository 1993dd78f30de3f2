#pragma once

#include "cpdvmc/errors.hpp"
#include "cpdvmc/log.hpp"
#include "cpdvmc/fock.hpp"
#include "cpdvmc/amplitude.hpp"
#include "cpdvmc/hubbard.hpp"
#include "cpdvmc/ab_initio.hpp"
#include "cpdvmc/fcidump.hpp"
#include "cpdvmc/hamiltonian.hpp"
#include "cpdvmc/hartree_fock.hpp"
#include "cpdvmc/cpd_ansatz.hpp"
#include "cpdvmc/eval_context.hpp"
#include "cpdvmc/sampler.hpp"
#include "cpdvmc/sr.hpp"
#include "cpdvmc/optimize.hpp"
#include "cpdvmc/observables.hpp"
#include "cpdvmc/oracle.hpp"
#include "cpdvmc/analysis.hpp"
#include "cpdvmc/config.hpp"
