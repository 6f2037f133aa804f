#include "mmsd/train_config.hpp"

#include <string>

namespace mmsd {

namespace {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const char* what) {
  require(j.is_object(), std::string(what) + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ValidationError(std::string(what) + ": unknown key '" + key + "'");
  }
}

}  // namespace

nlohmann::ordered_json to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["lq_height"] = c.lq_height;
  j["lq_width"] = c.lq_width;
  j["scale"] = c.scale;
  j["half_window"] = c.half_window;
  j["features"] = c.features;
  j["lstm_hidden"] = c.lstm_hidden;
  j["lstm_layers"] = c.lstm_layers;
  j["audio_grid_channels"] = c.audio_grid_channels;
  j["audio_grid_height"] = c.audio_grid_height;
  j["audio_grid_width"] = c.audio_grid_width;
  j["audio_upsample_widths"] = c.audio_upsample_widths;
  j["video_res_blocks"] = c.video_res_blocks;
  j["recon_res_blocks"] = c.recon_res_blocks;
  j["au_hidden"] = c.au_hidden;
  j["au_dropout"] = c.au_dropout;
  j["attention_hidden"] = c.attention_hidden;
  j["embed"] = c.embed;
  j["disc_widths"] = c.disc_widths;
  j["plain_alignment"] = c.plain_alignment;
  return j;
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_epsilon"] = c.adam_epsilon;
  j["lambda1"] = c.lambda1;
  j["lambda2"] = c.lambda2;
  j["warmup_epochs"] = c.warmup_epochs;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["miniature"] = c.miniature;
  return j;
}

void update_from_json(ModelConfig& c, const nlohmann::json& j) {
  reject_unknown(j,
                 {"lq_height", "lq_width", "scale", "half_window", "features", "lstm_hidden", "lstm_layers",
                  "audio_grid_channels", "audio_grid_height", "audio_grid_width", "audio_upsample_widths",
                  "video_res_blocks", "recon_res_blocks", "au_hidden", "au_dropout", "attention_hidden", "embed",
                  "disc_widths", "plain_alignment"},
                 "model config");
  try {
    take(j, "lq_height", c.lq_height);
    take(j, "lq_width", c.lq_width);
    take(j, "scale", c.scale);
    take(j, "half_window", c.half_window);
    take(j, "features", c.features);
    take(j, "lstm_hidden", c.lstm_hidden);
    take(j, "lstm_layers", c.lstm_layers);
    take(j, "audio_grid_channels", c.audio_grid_channels);
    take(j, "audio_grid_height", c.audio_grid_height);
    take(j, "audio_grid_width", c.audio_grid_width);
    take(j, "audio_upsample_widths", c.audio_upsample_widths);
    take(j, "video_res_blocks", c.video_res_blocks);
    take(j, "recon_res_blocks", c.recon_res_blocks);
    take(j, "au_hidden", c.au_hidden);
    take(j, "au_dropout", c.au_dropout);
    take(j, "attention_hidden", c.attention_hidden);
    take(j, "embed", c.embed);
    take(j, "disc_widths", c.disc_widths);
    take(j, "plain_alignment", c.plain_alignment);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
}

void update_from_json(TrainConfig& c, const nlohmann::json& j) {
  reject_unknown(j,
                 {"batch_size", "lr", "beta1", "beta2", "adam_epsilon", "lambda1", "lambda2", "warmup_epochs",
                  "epochs", "seed", "miniature"},
                 "train config");
  try {
    take(j, "batch_size", c.batch_size);
    take(j, "lr", c.lr);
    take(j, "beta1", c.beta1);
    take(j, "beta2", c.beta2);
    take(j, "adam_epsilon", c.adam_epsilon);
    take(j, "lambda1", c.lambda1);
    take(j, "lambda2", c.lambda2);
    take(j, "warmup_epochs", c.warmup_epochs);
    take(j, "epochs", c.epochs);
    take(j, "seed", c.seed);
    take(j, "miniature", c.miniature);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("train config: ") + e.what());
  }
}

}  // namespace mmsd
