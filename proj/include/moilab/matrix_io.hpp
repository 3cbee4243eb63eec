#pragma once

#include <string>

#include "moilab/spectral.hpp"

namespace moilab {

/// Nested rows of [re, im] pairs (plain numbers are read as real entries).
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Matrix& m);

/// One matrix row per line, interleaved re,im columns (2d values per line).
/// Blank lines and lines starting with '#' are skipped. ParseError messages
/// carry "<source>:<line>".
Matrix matrix_from_csv(const std::string& text, const std::string& source = "<csv>");
std::string matrix_to_csv(const Matrix& m);

/// Dispatches on the extension (.json or .csv).
Matrix load_matrix(const std::string& path);
void save_matrix(const Matrix& m, const std::string& path);

}  // namespace moilab
