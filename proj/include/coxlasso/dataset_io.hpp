#pragma once

#include "coxlasso/survival_data.hpp"

#include <string>

namespace coxlasso {

enum class DatasetFormat {
  Auto,  // by extension on save (.json means Json), by first byte on load
  Text,
  Json,
};

/*
 * Line-oriented text form:
 *
 *   n=<int> p=<int> K=<float>
 *   subject <id> risk=<start>,<end> event=<time|none>
 *   seg <t_lo> <v_1> ... <v_p>
 *   ...
 *
 * Subjects appear in index order. The first seg line of a subject starts at
 * the at-risk start; each further seg line starts at one of the path's
 * breakpoints. All numbers are shortest round-trip decimals, so a save/load
 * cycle reproduces every field bit for bit. The format can only carry
 * breakpoints above the at-risk start; save refuses paths that switch levels
 * earlier, which no simulated dataset does.
 *
 * The JSON form carries the same fields under the same names, with event null
 * for censored subjects and "inf" as a string for an unbounded at-risk end.
 */
std::string dataset_to_text(const Dataset& d);
Dataset dataset_from_text(const std::string& text, const std::string& origin = "<string>");

std::string dataset_to_json_text(const Dataset& d);
Dataset dataset_from_json_text(const std::string& text, const std::string& origin = "<string>");

void save_dataset(const Dataset& d, const std::string& path,
                  DatasetFormat format = DatasetFormat::Auto);
Dataset load_dataset(const std::string& path, DatasetFormat format = DatasetFormat::Auto);

}  // namespace coxlasso
