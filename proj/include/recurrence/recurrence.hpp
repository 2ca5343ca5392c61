#pragma once

#include "recurrence/core.hpp"
#include "recurrence/parallel.hpp"
#include "recurrence/reconstruct.hpp"
#include "recurrence/recmat.hpp"
#include "recurrence/return_stats.hpp"
#include "recurrence/rqa.hpp"
#include "recurrence/separation.hpp"
#include "recurrence/surrogates.hpp"
#include "recurrence/systems.hpp"
