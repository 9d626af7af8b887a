#pragma once

// Private helpers for moving Eigen data in and out of nlohmann::json.

#include <string>

#include <json.hpp>

#include "stochlin/types.hpp"

namespace stochlin::jsonio {

using Json = nlohmann::ordered_json;

Json matrix(const Matrix& M);
Json vector(const Vector& v);
Json complex(Complex z);
/// Real matrices when the imaginary part vanishes, else {"re": ..., "im": ...}.
Json cmatrix(const CMatrix& M);

/// Strict readers; `field` is used in error messages.
Matrix read_matrix(const Json& j, const std::string& field);
Vector read_vector(const Json& j, const std::string& field);
double read_number(const Json& j, const std::string& field);

}  // namespace stochlin::jsonio
