#pragma once

#include "classifier.hpp"
#include "dataset.hpp"
#include "partition.hpp"
#include "scoring.hpp"
#include "search.hpp"
#include "synth.hpp"
