//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef EBM_XYZ_HPP
#define EBM_XYZ_HPP

#include <string>
#include <vector>

#include "ebm/state.hpp"

namespace ebm {

// XYZ-style text files: count line, comment line, then one
// "<symbol> <x> <y> <z>" line per atom. Type labels use T0..T{K-1};
// the symbols H,C,N,O,F are accepted as aliases for labels 0..4.
// Coordinates are written with 6 decimals.

/// Load every record in the file. n_types = 0 infers K from the largest
/// label seen across the whole file. Throws parse_error with the offending
/// line number on malformed input.
std::vector<MixedState> load_xyz(const std::string& path, int n_types = 0);

/// Write states as consecutive XYZ records (types are argmax-discretized).
/// `comments[i]`, when provided, becomes record i's comment line.
void save_xyz(const std::vector<MixedState>& states, const std::string& path,
              const std::vector<std::string>& comments = {});

void save_xyz(const std::vector<LabeledCloud>& clouds, int n_types, const std::string& path,
              const std::vector<std::string>& comments = {});

/// Comment line of the first record, or "" (used for inpaint task files,
/// which carry "frozen=i,j,k" there).
std::string read_first_comment(const std::string& path);

std::string label_symbol(int label);
int symbol_label(const std::string& symbol);  // -1 when unknown

}  // namespace ebm

#endif  // EBM_XYZ_HPP
