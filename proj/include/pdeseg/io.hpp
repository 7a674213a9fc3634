#pragma once

#include "pdeseg/field.hpp"

#include <string>

namespace pdeseg {

/// Write an 8-bit binary PGM (P5). Values are clamped to [0,1] and
/// quantized as round(255 * v).
void write_pgm(const std::string& path, const Field2D& img);

/// Write a mask as PGM with {0, 255} levels.
void write_pgm(const std::string& path, const BinaryMask& mask);

/// Read an 8-bit P5 PGM as a field scaled to [0,1]. Malformed input raises
/// IoError naming the byte offset.
Field2D read_pgm(const std::string& path);

/// Read a {0,255}-style PGM as a mask; any value >= 128 is foreground.
BinaryMask read_pgm_mask(const std::string& path);

/// Lossless field dump: 8-byte magic "FLD2D64\n", uint32 LE height and
/// width, then row-major float64 LE.
void write_field_raw(const std::string& path, const Field2D& f);
Field2D read_field_raw(const std::string& path);

} // namespace pdeseg
