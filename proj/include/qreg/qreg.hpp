#pragma once

#include "qreg/core.hpp"
#include "qreg/diagnostics.hpp"
#include "qreg/inner.hpp"
#include "qreg/model.hpp"
#include "qreg/outer.hpp"
#include "qreg/problems/data_io.hpp"
#include "qreg/problems/dct.hpp"
#include "qreg/problems/generators.hpp"
#include "qreg/problems/logistic.hpp"
#include "qreg/problems/mvsk.hpp"
#include "qreg/problems/operators.hpp"
#include "qreg/problems/rng.hpp"
#include "qreg/problems/student_t.hpp"
#include "qreg/prox.hpp"
