#include "hawkesmix/common.hpp"

#include <boost/math/special_functions/digamma.hpp>

namespace hawkesmix {

double digamma(double x) { return boost::math::digamma(x); }

}  // namespace hawkesmix
