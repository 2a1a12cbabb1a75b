#pragma once

#include <string>
#include <vector>

#include "watermap/matrix.hpp"

namespace watermap::io {

// Round-trippable decimal rendering of a double.
std::string format_double(double v);

Matrix read_csv_matrix(const std::string& path, bool header);
Matrix read_rawbin_matrix(const std::string& path);

// Single integer column, no header.
std::vector<int> read_labels_csv(const std::string& path);

// header may be empty to suppress the header line.
void write_csv_matrix(const std::string& path, const Matrix& m,
                      const std::string& header);

void write_embedding_csv(const std::string& path, const Embedding& emb);
Embedding read_embedding_csv(const std::string& path);

} // namespace watermap::io
