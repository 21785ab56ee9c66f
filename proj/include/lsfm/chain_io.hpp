#pragma once

#include "lsfm/model.hpp"
#include "lsfm/sampler.hpp"

#include <filesystem>
#include <string>

namespace lsfm {

/// Files written for one fitted chain:
///   draws.csv            iteration,parameter,value (retained draws, long format)
///   summary.csv          parameter,mean,sd,q2.5,q50,q97.5,acceptance_rate
///   deviance.csv         iteration,deviance (every iteration, burn-in included)
///   mu_summary.csv       patient_id,site,mean,sd
///   posterior_means.csv  block,row,col,value
///   chain.cfg            variant flags and chain length
std::string draws_csv(const ChainOutput& chain);
std::string summary_csv(const ChainOutput& chain);
std::string deviance_csv(const ChainOutput& chain);
std::string mu_summary_csv(const ChainOutput& chain, const Dataset& data);
std::string posterior_means_csv(const ChainOutput& chain);

void write_chain(const ChainOutput& chain, const Dataset& data, const std::filesystem::path& dir);

/// Reads back what write_chain produced.
ChainOutput read_chain(const std::filesystem::path& dir);

}  // namespace lsfm
