#pragma once

#include "nnbc/autodiff.hpp"
#include "nnbc/error.hpp"
#include "nnbc/expr.hpp"
#include "nnbc/interval.hpp"
#include "nnbc/loss.hpp"
#include "nnbc/nn.hpp"
#include "nnbc/sampling.hpp"
#include "nnbc/scalar.hpp"
#include "nnbc/sim.hpp"
#include "nnbc/smt.hpp"
#include "nnbc/system.hpp"
#include "nnbc/train.hpp"
#include "nnbc/verify.hpp"
