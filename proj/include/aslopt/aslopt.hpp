#pragma once

#include "common.hpp"
#include "linsys.hpp"
#include "arcs.hpp"
#include "asl.hpp"
#include "optimality.hpp"
#include "optimizer.hpp"
#include "chain.hpp"
#include "oracle.hpp"
#include "cases.hpp"
#include "io.hpp"
