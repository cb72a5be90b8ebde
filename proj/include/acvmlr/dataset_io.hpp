#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>

#include "acvmlr/model.hpp"

namespace acvmlr::io {

enum class Format { csv, libsvm };

/// Picks libsvm for .svm/.libsvm/.txt extensions, csv otherwise.
Format format_from_path(const std::string& path);

/**
 * CSV with a header row: one column named "label" holding classes 1..L,
 * every other column is a feature. n_classes is the largest label unless
 * n_classes_hint is larger.
 */
Dataset read_csv(std::istream& in, int n_classes_hint = 0);
void write_csv(std::ostream& out, const Dataset& data);

/// "label idx:val ..." lines with 1-based feature indices.
Dataset read_libsvm(std::istream& in, int n_classes_hint = 0, int n_features_hint = 0);
void write_libsvm(std::ostream& out, const Dataset& data);

Dataset read_dataset(const std::string& path, Format format, int n_classes_hint = 0);
void write_dataset(const std::string& path, const Dataset& data, Format format);

/// Plain comma-separated matrix, one row per line.
void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in);

/// Appends a penalized all-ones feature column.
Dataset add_constant_feature(const Dataset& data);

/// FNV-1a over labels, shape and feature bytes.
std::uint64_t digest(const Dataset& data);
std::string digest_hex(const Dataset& data);

} // namespace acvmlr::io
