#pragma once

#include <stdexcept>
#include <string>

namespace hawkesmix {

inline constexpr const char* kVersion = "0.1.0";

// Raised for malformed or contract-violating inputs (files, flags, argument
// domains). The CLI maps it to exit code 2; numerical failures stay
// std::runtime_error and map to exit code 1.
class invalid_input : public std::runtime_error {
public:
    explicit invalid_input(const std::string& what) : std::runtime_error(what) {}
};

// sqrt(pi/2): mean factor of a unit-scale Rayleigh variable.
inline constexpr double kSqrtHalfPi = 1.2533141373155003;
// (4 - pi)/2: variance factor of a unit-scale Rayleigh variable.
inline constexpr double kRayleighVarFactor = 0.4292036732051034;

double digamma(double x);

}  // namespace hawkesmix
