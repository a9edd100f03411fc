#pragma once

#include "ftfft/abft.hpp"
#include "ftfft/fault_lab.hpp"
#include "ftfft/fft.hpp"
#include "ftfft/plan.hpp"
#include "ftfft/planner.hpp"
#include "ftfft/signal.hpp"
#include "ftfft/signal_io.hpp"
#include "ftfft/twiddle.hpp"
