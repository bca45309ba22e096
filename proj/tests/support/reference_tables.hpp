// Reference detection results used as metric oracles.
#pragma once

#include <array>
#include <string_view>

namespace reference {

inline constexpr int kClasses = 11;

// Row/column order of the printed confusion matrix.
inline constexpr std::array<std::string_view, kClasses> kMatrixOrder{
    "ADM", "DDPM", "DPjG", "DSG", "IDDPM", "LDM", "PjG", "SG", "PG", "PNDM", "Real"};

// Rows are ground truth, columns are predictions.
inline constexpr long kConfusion[kClasses][kClasses] = {
    {718, 2, 0, 0, 251, 0, 0, 0, 0, 0, 7},
    {0, 1032, 2, 0, 0, 0, 0, 0, 0, 0, 3},
    {0, 0, 821, 0, 0, 2, 151, 0, 3, 0, 0},
    {0, 0, 0, 1008, 0, 0, 0, 0, 1, 0, 0},
    {94, 7, 0, 0, 884, 0, 1, 0, 0, 0, 0},
    {0, 0, 2, 0, 0, 953, 0, 0, 5, 1, 1},
    {0, 0, 227, 1, 0, 0, 766, 1, 5, 0, 0},
    {0, 0, 1, 3, 0, 0, 1, 1034, 8, 0, 1},
    {0, 0, 4, 1, 0, 0, 3, 5, 980, 0, 0},
    {0, 0, 1, 1, 0, 2, 0, 0, 0, 1006, 0},
    {13, 25, 1, 0, 4, 0, 0, 0, 0, 0, 957},
};

// Printed per-class precision, recall, F1 (matrix order).
inline constexpr double kPrecision[kClasses] = {.87, .968, .775, .994, .776, .996, .831, .994, .978, .999, .988};
inline constexpr double kRecall[kClasses] = {.734, .995, .84, .999, .897, .991, .766, .987, .987, .996, .957};
inline constexpr double kF1[kClasses] = {.796, .981, .806, .997, .832, .993, .797, .99, .982, .998, .972};

struct DetectionRow {
  std::string_view abbreviation;
  long total;
  long cnndet;
  long dire;
  long clip;
  double cnndet_accuracy;
  double dire_accuracy;
  double clip_accuracy;
};

// Correct real/fake predictions per generation method and the matching
// accuracies. The SG CNNDet accuracy (.319) does not equal 344/1048.
inline constexpr std::array<DetectionRow, kClasses> kDetection{{
    {"ADM", 978, 3, 978, 971, .003, 1.0, .993},
    {"DDPM", 1037, 5, 1034, 1034, .005, .997, .997},
    {"DPjG", 977, 44, 976, 977, .045, .999, 1.0},
    {"DSG", 1009, 811, 1009, 1009, .804, 1.0, 1.0},
    {"IDDPM", 986, 4, 986, 986, .004, 1.0, 1.0},
    {"LDM", 962, 4, 962, 961, .004, 1.0, .999},
    {"PNDM", 1010, 2, 1010, 1010, .002, 1.0, 1.0},
    {"PG", 993, 991, 992, 993, .998, .999, 1.0},
    {"PjG", 1000, 74, 1000, 1000, .074, 1.0, 1.0},
    {"Real", 1000, 1000, 2, 957, 1.0, .002, .957},
    {"SG", 1048, 344, 1046, 1047, .319, .998, .999},
}};

}  // namespace reference
