#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mmsd/trainer.hpp"

namespace mmsd {

inline constexpr char kCheckpointMagic[8] = {'M', 'M', 'S', 'D', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("checkpoint truncated while reading " + what);
  return v;
}

template <typename Scalar>
void put_matrix(std::ostream& os, const RowMatrix<Scalar>& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.size() == 0) {
    const RowMatrix<Scalar> z = RowMatrix<Scalar>::Zero(rows, cols);
    os.write(reinterpret_cast<const char*>(z.data()), static_cast<std::streamsize>(z.size() * sizeof(Scalar)));
  } else {
    os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(Scalar)));
  }
}

template <typename Scalar>
void get_matrix(std::istream& is, RowMatrix<Scalar>& m, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  m.resize(rows, cols);
  is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(Scalar)));
  if (!is) throw FormatError("checkpoint truncated while reading " + what);
}

template <typename Scalar>
nlohmann::ordered_json manifest(const nn::ParameterList<Scalar>& params) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& p : params)
    arr.push_back({{"name", p.name}, {"rows", p.param->value.rows()}, {"cols", p.param->value.cols()}});
  return arr;
}

template <typename Scalar>
void write_block(std::ostream& os, const nn::ParameterList<Scalar>& params, const Adam<Scalar>& opt) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& v = params[i].param->value;
    put_matrix(os, v, v.rows(), v.cols());
    put_matrix(os, opt.first_moment.empty() ? RowMatrix<Scalar>() : opt.first_moment[i], v.rows(), v.cols());
    put_matrix(os, opt.second_moment.empty() ? RowMatrix<Scalar>() : opt.second_moment[i], v.rows(), v.cols());
  }
}

template <typename Scalar>
void read_block(std::istream& is, const nn::ParameterList<Scalar>& params, const nlohmann::json& manifest,
                Adam<Scalar>& opt) {
  if (manifest.size() != params.size())
    throw FormatError("checkpoint has " + std::to_string(manifest.size()) + " parameters, model expects " +
                      std::to_string(params.size()));
  opt.first_moment.assign(params.size(), {});
  opt.second_moment.assign(params.size(), {});
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& v = params[i].param->value;
    const auto& e = manifest[i];
    if (e.at("name").get<std::string>() != params[i].name || e.at("rows").get<Eigen::Index>() != v.rows() ||
        e.at("cols").get<Eigen::Index>() != v.cols())
      throw FormatError("checkpoint parameter " + std::to_string(i) + " is '" + e.at("name").get<std::string>() +
                        "', model expects '" + params[i].name + "' " + std::to_string(v.rows()) + "x" +
                        std::to_string(v.cols()));
    get_matrix(is, v, v.rows(), v.cols(), params[i].name);
    get_matrix(is, opt.first_moment[i], v.rows(), v.cols(), params[i].name + " (m)");
    get_matrix(is, opt.second_moment[i], v.rows(), v.cols(), params[i].name + " (v)");
    params[i].param->grad.setZero(v.rows(), v.cols());
  }
}

}  // namespace detail

/// Binary layout: magic, u32 version, u32 sizeof(Scalar), u64 header length,
/// JSON header, then value/m/v for every generator then discriminator parameter.
template <typename Scalar>
void save_checkpoint(TrainState<Scalar>& state, const std::filesystem::path& path) {
  auto g = state.generator.parameters();
  nn::ParameterList<Scalar> d;
  state.discriminator.parameters(d, "disc");
  std::ostringstream rng;
  rng << state.rng;
  nlohmann::ordered_json header;
  header["model"] = to_json(state.model);
  header["train"] = to_json(state.train);
  header["epoch"] = state.epoch;
  header["step"] = state.step;
  header["batch_in_epoch"] = state.batch_in_epoch;
  header["rng"] = rng.str();
  header["generator_adam_steps"] = state.generator_opt.steps;
  header["discriminator_adam_steps"] = state.discriminator_opt.steps;
  header["generator"] = detail::manifest(g);
  header["discriminator"] = detail::manifest(d);
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ValidationError("cannot write checkpoint " + tmp.string());
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::put(os, kCheckpointVersion);
    detail::put(os, static_cast<std::uint32_t>(sizeof(Scalar)));
    detail::put(os, static_cast<std::uint64_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    detail::write_block(os, g, state.generator_opt);
    detail::write_block(os, d, state.discriminator_opt);
    if (!os) throw ValidationError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

template <typename Scalar>
TrainState<Scalar> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open checkpoint " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw FormatError(path.string() + " is not a checkpoint (bad magic)");
  const auto version = detail::get<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint version mismatch: expected " + std::to_string(kCheckpointVersion) + ", found " +
                      std::to_string(version));
  const auto scalar = detail::get<std::uint32_t>(is, "scalar size");
  if (scalar != sizeof(Scalar))
    throw FormatError("checkpoint scalar size is " + std::to_string(scalar) + " bytes, expected " +
                      std::to_string(sizeof(Scalar)));
  const auto length = detail::get<std::uint64_t>(is, "header length");
  std::string text(length, '\0');
  is.read(text.data(), static_cast<std::streamsize>(length));
  if (!is) throw FormatError("checkpoint truncated in header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }

  ModelConfig model;
  TrainConfig train;
  update_from_json(model, header.at("model"));
  update_from_json(train, header.at("train"));
  TrainState<Scalar> state(model, train);
  state.epoch = header.at("epoch").get<std::int64_t>();
  state.step = header.at("step").get<std::int64_t>();
  state.batch_in_epoch = header.at("batch_in_epoch").get<std::int64_t>();
  std::istringstream rng(header.at("rng").get<std::string>());
  rng >> state.rng;
  if (!rng) throw FormatError("checkpoint rng state is corrupt");

  auto g = state.generator.parameters();
  nn::ParameterList<Scalar> d;
  state.discriminator.parameters(d, "disc");
  detail::read_block(is, g, header.at("generator"), state.generator_opt);
  detail::read_block(is, d, header.at("discriminator"), state.discriminator_opt);
  state.generator_opt.steps = header.at("generator_adam_steps").get<std::int64_t>();
  state.discriminator_opt.steps = header.at("discriminator_adam_steps").get<std::int64_t>();
  is.peek();
  if (!is.eof()) throw FormatError("checkpoint has trailing bytes");
  return state;
}

}  // namespace mmsd
