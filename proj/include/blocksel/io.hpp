#pragma once
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <blocksel/linalg.hpp>

namespace blocksel {

/// Headerless numeric CSV. Throws ConfigError with line/column on malformed or non-finite cells.
Matrix parse_csv_matrix(const std::string& text, const std::string& source = "<input>");
Matrix read_csv_matrix(const std::filesystem::path& path);

/// Shortest round-trip representation of every entry, one row per line.
std::string format_csv_matrix(const Matrix& m);
std::string format_csv_matrix(const Eigen::MatrixXi& m);

std::string read_text_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/**
 * Writes every file to a temporary sibling first and renames only after all
 * writes succeeded, so a failure leaves none of the targets touched.
 */
void write_files_atomic(const std::vector<std::pair<std::filesystem::path, std::string>>& files);

} // namespace blocksel
