#pragma once

// CSV files for sweeps, time series, spectra and flat key-value records.
// Every file starts with a header row; optional "# key=value" lines before
// it carry metadata such as the sample rate.

#include "mwres/fit.hpp"
#include "mwres/noisepsd.hpp"
#include "mwres/synth.hpp"

#include <map>
#include <string>
#include <vector>

namespace mwres {

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

/// Throws ConfigError when the text is not a finite number.
double parse_double(const std::string& s);

struct CsvTable {
  std::map<std::string, std::string> meta;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;  // throws ConfigError
  std::vector<double> values(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

using KeyValues = std::vector<std::pair<std::string, std::string>>;
void write_key_values(const std::string& path, const KeyValues& kv);
std::map<std::string, std::string> read_key_values(const std::string& path);

void write_sweep_csv(const std::string& path, const S21Sweep& sweep);
S21Sweep read_sweep_csv(const std::string& path);

void write_series_csv(const std::string& path, const S21Series& series);
S21Series read_series_csv(const std::string& path);
void write_truth_csv(const std::string& path, const S21Series& series);

void write_psd_csv(const std::string& path, const PsdEstimate& psd);
PsdEstimate read_psd_csv(const std::string& path);

KeyValues fit_to_key_values(const SweepFitResult& fit);
SweepFitResult fit_from_key_values(const std::map<std::string, std::string>& kv);

}  // namespace mwres
