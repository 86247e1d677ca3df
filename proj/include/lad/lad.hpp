#pragma once

#include "lad/core.hpp"
#include "lad/graph.hpp"
#include "lad/detect.hpp"
#include "lad/eval.hpp"
#include "lad/synth.hpp"
#include "lad/io.hpp"
#include "lad/config.hpp"
