#pragma once

#include "pocbounds/affine_form.hpp"
#include "pocbounds/builtin_models.hpp"
#include "pocbounds/compensated_sum.hpp"
#include "pocbounds/errors.hpp"
#include "pocbounds/harness.hpp"
#include "pocbounds/inference.hpp"
#include "pocbounds/normal.hpp"
#include "pocbounds/oracle.hpp"
#include "pocbounds/rng.hpp"
#include "pocbounds/sample_size.hpp"
#include "pocbounds/scm.hpp"
#include "pocbounds/serialize.hpp"
#include "pocbounds/theta.hpp"
