// Copyright 2026 The CPT Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cpt/cpt.hpp"

namespace cpt::cli {
namespace {

namespace fs = std::filesystem;

// Head file names shared by `encode` output, `decode` and `loss` input.
constexpr const char* kHeads[] = {"heatmap",     "offset",       "size",          "depth",
                                  "dims",        "orientation",  "joint_offset",  "joint_heatmap",
                                  "joint_local_offset"};

struct Settings {
  int stride = 4;
  int classes = 0;
  int joints = 17;
  std::size_t top_k = 100;
  double joint_thresh = 0.1;
  double alpha = 2;
  double beta = 4;
  double eps = 1e-4;
  double min_overlap = 0.7;
  double lambda_size = 0.1;
  double lambda_off = 1;
  double lambda_dep = 1;
  double lambda_dim = 1;
  double lambda_ori = 1;
  std::string units = "pixels";
  std::string output_space = "cells";
  std::vector<double> thresholds{0.5, 0.7};
  double iou = 0.5;
  int recall_points = 11;
  bool oracle = false;
  bool no_pairs = false;
  std::uint64_t seed = 0;
  int trials = 100;
  double step = 1e-8;
  double tolerance = 1e-5;
  std::int64_t image_id = -1;
  std::string out_path;
  std::string dataset;
  std::string targets;
  std::string pred;
  std::string grad_out;
  std::vector<std::string> inputs;
  std::string detections = "-";
  SyntheticOptions synth;
};

SizeUnits parse_units(const std::string& s) {
  if (s == "pixels") return SizeUnits::kPixels;
  if (s == "cells") return SizeUnits::kCells;
  throw InputError("--units must be 'pixels' or 'cells'");
}

void emit(std::ostream& out, const json& j) { out << j.dump(2) << "\n"; }

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

Dataset load_with_warnings(const std::string& path, std::ostream& err) {
  Dataset ds = load_dataset(path);
  for (const auto& w : ds.warnings) err << "warning: " << w << "\n";
  return ds;
}

EncoderConfig base_config(const Settings& s) {
  EncoderConfig cfg;
  cfg.stride = s.stride;
  cfg.num_classes = std::max(1, s.classes);
  cfg.num_joints = s.joints;
  cfg.min_overlap = s.min_overlap;
  cfg.size_units = parse_units(s.units);
  return cfg;
}

EncoderConfig image_config(const Dataset& ds, const ImageInfo& im, const Settings& s) {
  EncoderConfig cfg = encoder_config_for(ds, im, base_config(s));
  if (s.classes > 0) {
    require(s.classes >= static_cast<int>(ds.categories.size()), "--classes is smaller than the dataset's category count");
    cfg.num_classes = s.classes;
  }
  return cfg;
}

LossWeights weights_of(const Settings& s) {
  LossWeights w;
  w.size = s.lambda_size;
  w.offset = s.lambda_off;
  w.depth = s.lambda_dep;
  w.dims = s.lambda_dim;
  w.orientation = s.lambda_ori;
  return w;
}

FocalParams focal_of(const Settings& s) { return {s.alpha, s.beta, s.eps}; }

std::vector<GroundTruth> ground_truth_of(const Dataset& ds) {
  std::vector<GroundTruth> gts;
  for (const auto& a : ds.annotations) gts.push_back({a.id, a.image_id, a.object.category, a.object.bbox});
  return gts;
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const Settings& s, std::ostream& out) {
  CounterRng rng(s.seed);
  const Dataset ds = make_synthetic_dataset(s.synth, rng);
  const json doc = dataset_to_json(ds);
  if (s.out_path.empty()) {
    out << doc.dump() << "\n";
  } else {
    write_json_file(s.out_path, doc);
    emit(out, {{"images", ds.images.size()}, {"annotations", ds.annotations.size()}, {"path", s.out_path}});
  }
  return 0;
}

// ---------------------------------------------------------------------------
// encode

std::string image_dir_name(std::int64_t id) { return "img_" + std::to_string(id); }

int cmd_encode(const Settings& s, std::ostream& out, std::ostream& err) {
  require(!s.out_path.empty(), "encode: --out is required");
  const Dataset ds = load_with_warnings(s.dataset, err);
  const fs::path root(s.out_path);
  fs::create_directories(root);
  const auto by_image = ds.annotations_by_image();
  const EncoderConfig base = base_config(s);

  json manifest = {{"config",
                    {{"stride", base.stride},
                     {"num_classes", std::max<int>(s.classes, static_cast<int>(ds.categories.size()))},
                     {"num_joints", base.num_joints},
                     {"min_overlap", base.min_overlap},
                     {"size_units", units_name(base.size_units)}}},
                   {"images", json::array()}};
  std::size_t objects = 0, collisions = 0, clamped = 0;
  for (std::size_t k = 0; k < ds.images.size(); ++k) {
    const auto& im = ds.images[k];
    const EncoderConfig cfg = image_config(ds, im, s);
    const auto objs = ds.objects_of(k, by_image);
    const TargetSet ts = encode(objs, cfg);
    const auto heads = render_head_maps(ts);

    const fs::path dir = root / image_dir_name(im.id);
    fs::create_directories(dir);
    save_grid(dir / "heatmap.cptg", ts.heatmap);
    save_grid(dir / "offset.cptg", ts.offset);
    save_grid(dir / "size.cptg", ts.size);
    save_grid(dir / "center_mask.cptg", ts.center_mask);
    if (heads.depth) save_grid(dir / "depth.cptg", *heads.depth);
    if (heads.dims) save_grid(dir / "dims.cptg", *heads.dims);
    if (heads.orientation) save_grid(dir / "orientation.cptg", *heads.orientation);
    if (heads.joint_offset) save_grid(dir / "joint_offset.cptg", *heads.joint_offset);
    if (ts.pose) {
      save_grid(dir / "joint_heatmap.cptg", ts.pose->joint_heatmap);
      save_grid(dir / "joint_local_offset.cptg", ts.pose->joint_local_offset);
    }
    write_json_file(dir / "meta.json", {{"image_id", im.id},
                                        {"stride", cfg.stride},
                                        {"size_units", units_name(cfg.size_units)},
                                        {"num_classes", cfg.num_classes}});

    json records = json::array();
    for (std::size_t i = 0; i < ts.objects.size(); ++i) {
      json r = to_json(ts.objects[i]);
      r["annotation_id"] = ds.annotations[by_image[k][i]].id;
      records.push_back(std::move(r));
    }
    json pairs = json::array();
    for (const auto& c : ts.collisions) {
      pairs.push_back({{"ids", {ds.annotations[by_image[k][c.first]].id, ds.annotations[by_image[k][c.second]].id}},
                       {"category", c.category},
                       {"cell", {c.cell_x, c.cell_y}}});
    }
    json entry = {{"image_id", im.id},
                  {"dir", image_dir_name(im.id)},
                  {"width", im.width},
                  {"height", im.height},
                  {"grid", {cfg.grid_width(), cfg.grid_height()}},
                  {"objects", records},
                  {"collisions", pairs},
                  {"clamped", ts.clamped}};
    if (ts.pose) {
      json joints = json::array();
      for (const auto& j : ts.pose->joints) {
        joints.push_back({{"object", j.object},
                          {"joint", j.joint},
                          {"cell", {j.cell_x, j.cell_y}},
                          {"offset", {j.offset_x, j.offset_y}}});
      }
      entry["joints"] = joints;
    }
    manifest["images"].push_back(std::move(entry));
    objects += ts.objects.size();
    collisions += ts.collisions.size();
    clamped += ts.clamped;
  }
  write_json_file(root / "manifest.json", manifest);
  emit(out, {{"images", ds.images.size()},
             {"objects", objects},
             {"collisions", collisions},
             {"clamped", clamped},
             {"manifest", (root / "manifest.json").string()}});
  return 0;
}

/// Rebuilds one image's TargetSet from an `encode` output directory.
TargetSet load_targets(const fs::path& root, std::int64_t image_id) {
  const json manifest = read_json_file(root / "manifest.json");
  const auto& images = manifest.at("images");
  const auto it = std::find_if(images.begin(), images.end(),
                               [&](const json& e) { return e.at("image_id").get<std::int64_t>() == image_id; });
  if (it == images.end()) throw InputError("image " + std::to_string(image_id) + " not in manifest");
  const json& entry = *it;
  const json& c = manifest.at("config");

  TargetSet ts;
  ts.config.stride = c.at("stride").get<int>();
  ts.config.num_joints = c.at("num_joints").get<int>();
  ts.config.min_overlap = c.at("min_overlap").get<double>();
  ts.config.size_units = parse_units(c.at("size_units").get<std::string>());
  ts.config.input_width = entry.at("width").get<int>();
  ts.config.input_height = entry.at("height").get<int>();
  const fs::path dir = root / entry.at("dir").get<std::string>();
  ts.heatmap = load_grid(dir / "heatmap.cptg");
  ts.offset = load_grid(dir / "offset.cptg");
  ts.size = load_grid(dir / "size.cptg");
  ts.center_mask = load_grid(dir / "center_mask.cptg");
  ts.config.num_classes = ts.heatmap.channels();
  ts.clamped = entry.value("clamped", 0);
  for (const auto& r : entry.at("objects")) ts.objects.push_back(record_from_json(r));
  if (entry.contains("joints")) {
    PoseTargets pose{load_grid(dir / "joint_heatmap.cptg"), load_grid(dir / "joint_local_offset.cptg"), {}};
    for (const auto& j : entry["joints"]) {
      pose.joints.push_back({j.at("object").get<std::size_t>(), j.at("joint").get<int>(), j.at("cell").at(0).get<int>(),
                             j.at("cell").at(1).get<int>(), j.at("offset").at(0).get<double>(),
                             j.at("offset").at(1).get<double>()});
    }
    ts.pose = std::move(pose);
  }
  return ts;
}

std::map<std::string, Grid> load_heads(const fs::path& dir) {
  std::map<std::string, Grid> heads;
  for (const char* name : kHeads) {
    const fs::path p = dir / (std::string(name) + ".cptg");
    if (fs::exists(p)) heads.emplace(name, load_grid(p));
  }
  return heads;
}

// ---------------------------------------------------------------------------
// decode

int cmd_decode(const Settings& s, const CLI::App& sub, std::ostream& out) {
  require(!s.inputs.empty(), "decode: at least one prediction directory is required");
  require(s.output_space == "cells" || s.output_space == "pixels", "--output-space must be 'cells' or 'pixels'");
  require(s.image_id < 0 || s.inputs.size() == 1, "decode: --image-id needs exactly one directory");
  for (const auto& input : s.inputs) {
    const fs::path dir(input);
    DecodeOptions opts;
    opts.top_k = s.top_k;
    opts.stride = s.stride;
    opts.size_units = parse_units(s.units);
    std::int64_t image_id = 0;
    if (fs::exists(dir / "meta.json")) {
      const json meta = read_json_file(dir / "meta.json");
      image_id = meta.value("image_id", std::int64_t{0});
      if (sub.count("--stride") == 0 && meta.contains("stride")) opts.stride = meta["stride"].get<int>();
      if (sub.count("--units") == 0 && meta.contains("size_units")) {
        opts.size_units = parse_units(meta["size_units"].get<std::string>());
      }
    }
    if (s.image_id >= 0) image_id = s.image_id;

    const auto heads = load_heads(dir);
    for (const char* name : {"heatmap", "offset", "size"}) {
      if (!heads.count(name)) throw InputError(dir.string() + ": missing " + name + ".cptg");
    }
    const auto find = [&](const char* name) -> const Grid* {
      const auto it = heads.find(name);
      return it == heads.end() ? nullptr : &it->second;
    };
    std::vector<Detection> dets;
    if (find("joint_offset") && find("joint_heatmap") && find("joint_local_offset")) {
      PoseDecodeOptions pose;
      pose.joint_thresh = s.joint_thresh;
      dets = decode_pose(heads.at("heatmap"), heads.at("offset"), heads.at("size"), heads.at("joint_offset"),
                         heads.at("joint_heatmap"), heads.at("joint_local_offset"), opts, pose);
    } else {
      dets = decode_boxes(heads.at("heatmap"), heads.at("offset"), heads.at("size"), opts);
    }
    decode_3d(dets, find("depth"), find("dims"), find("orientation"));
    for (auto& d : dets) {
      d.image_id = image_id;
      if (s.output_space == "pixels") d = to_input_space(d, opts.stride);
      out << detection_to_json(d, s.output_space).dump() << "\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// loss / gradcheck

int cmd_loss(const Settings& s, std::ostream& out) {
  require(!s.targets.empty() && !s.pred.empty(), "loss: --targets and --pred are required");
  const fs::path root(s.targets);
  std::int64_t image_id = s.image_id;
  if (image_id < 0) {
    const json manifest = read_json_file(root / "manifest.json");
    require(manifest.at("images").size() == 1, "loss: --image-id is required for multi-image targets");
    image_id = manifest["images"][0].at("image_id").get<std::int64_t>();
  }
  const TargetSet ts = load_targets(root, image_id);
  const auto preds = load_heads(s.pred);
  const auto find = [&](const char* name) -> const Grid* {
    const auto it = preds.find(name);
    return it == preds.end() ? nullptr : &it->second;
  };
  HeadOutputs<double> heads{find("heatmap"),     find("offset"),       find("size"),
                            find("depth"),       find("dims"),         find("orientation"),
                            find("joint_offset"), find("joint_heatmap"), find("joint_local_offset")};
  const auto report = total_loss(heads, ts, weights_of(s), focal_of(s));
  json j = to_json(report);
  j["image_id"] = image_id;
  if (!s.grad_out.empty()) {
    fs::create_directories(s.grad_out);
    json files = json::object();
    for (const auto& [name, grad] : report.gradients) {
      const fs::path p = fs::path(s.grad_out) / (name + ".cptg");
      save_grid(p, grad);
      files[name] = p.string();
    }
    j["gradients"] = files;
  }
  emit(out, j);
  return 0;
}

int cmd_gradcheck(const Settings& s, std::ostream& out) {
  require(s.trials >= 1, "gradcheck: --trials must be >= 1");
  GradcheckOptions opts{s.step, s.tolerance};
  std::map<std::string, GradcheckReport> worst;
  std::map<std::string, std::uint64_t> worst_seed;
  for (int t = 0; t < s.trials; ++t) {
    const std::uint64_t seed = s.seed + static_cast<std::uint64_t>(t);
    for (auto& [name, r] : gradcheck_suite(seed, opts, focal_of(s))) {
      auto it = worst.find(name);
      if (it == worst.end()) {
        worst.emplace(name, r);
        worst_seed[name] = seed;
        continue;
      }
      it->second.checked += r.checked;
      it->second.excluded += r.excluded;
      if (r.max_rel_error > it->second.max_rel_error) {
        it->second.max_rel_error = r.max_rel_error;
        worst_seed[name] = seed;
      }
    }
  }
  json j = {{"seed", s.seed}, {"trials", s.trials}, {"step", s.step}, {"losses", json::object()}};
  bool ok = true;
  for (const auto& [name, r] : worst) {
    json e = to_json(r);
    e["worst_seed"] = worst_seed[name];
    j["losses"][name] = e;
    ok = ok && r.passed();
  }
  j["passed"] = ok;
  emit(out, j);
  return 0;
}

// ---------------------------------------------------------------------------
// analysis

int cmd_collisions(const Settings& s, std::ostream& out, std::ostream& err) {
  const Dataset ds = load_with_warnings(s.dataset, err);
  AnalysisOptions opts{s.oracle};
  const auto center = count_center_collisions(ds, s.stride, opts);
  auto merged = count_iou_collisions(ds, s.thresholds, opts);
  merged.stride = center.stride;
  merged.n_center = center.n_center;
  merged.center_pairs = center.center_pairs;
  emit(out, to_json(merged, true, !s.no_pairs));
  return 0;
}

int cmd_anchors(const Settings& s, std::ostream& out, std::ostream& err) {
  const Dataset ds = load_with_warnings(s.dataset, err);
  const auto report = count_forced_assignments(ds, AnchorConfig{}, s.iou, AnalysisOptions{s.oracle});
  emit(out, to_json(report));
  return 0;
}

// ---------------------------------------------------------------------------
// nms / eval / roundtrip

std::vector<UnitsTagged> read_detections(const std::string& path) {
  std::ifstream file;
  std::istream* in = &std::cin;
  if (path != "-") {
    file.open(path);
    if (!file) throw InputError("cannot open " + path);
    in = &file;
  }
  std::vector<UnitsTagged> dets;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(*in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      dets.push_back(detection_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw InputError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return dets;
}

int cmd_nms(const Settings& s, std::ostream& out) {
  const auto tagged = read_detections(s.detections);
  std::map<std::int64_t, std::vector<Detection>> by_image;
  std::map<std::int64_t, std::string> units;
  for (const auto& t : tagged) {
    by_image[t.detection.image_id].push_back(t.detection);
    auto [it, fresh] = units.emplace(t.detection.image_id, t.units);
    require(fresh || it->second == t.units, "nms: mixed units within one image");
  }
  for (const auto& [image, dets] : by_image) {
    for (const auto& d : greedy_nms(dets, s.iou)) out << detection_to_json(d, units[image]).dump() << "\n";
  }
  return 0;
}

int cmd_eval(const Settings& s, std::ostream& out, std::ostream& err) {
  const auto tagged = read_detections(s.detections);
  const Dataset ds = load_with_warnings(s.dataset, err);
  std::vector<Detection> dets;
  for (const auto& t : tagged) dets.push_back(t.units == "cells" ? to_input_space(t.detection, s.stride) : t.detection);
  const auto gts = ground_truth_of(ds);
  const int classes = std::max<int>(1, static_cast<int>(ds.categories.size()));
  emit(out, to_json(evaluate(dets, gts, classes, s.iou, s.recall_points)));
  return 0;
}

int cmd_roundtrip(const Settings& s, std::ostream& out, std::ostream& err) {
  const Dataset ds = load_with_warnings(s.dataset, err);
  const auto by_image = ds.annotations_by_image();
  const auto gts = ground_truth_of(ds);
  const int classes = std::max<int>(1, static_cast<int>(ds.categories.size()));

  struct PerImage {
    std::vector<Detection> dets;
    std::size_t collisions = 0;
  };
  std::vector<PerImage> results(ds.images.size());
  parallel_for(ds.images.size(), [&](std::size_t k) {
    const auto& im = ds.images[k];
    const EncoderConfig cfg = image_config(ds, im, s);
    const TargetSet ts = encode(ds.objects_of(k, by_image), cfg);
    DecodeOptions opts;
    opts.top_k = s.top_k;
    opts.stride = cfg.stride;
    opts.size_units = cfg.size_units;
    auto dets = decode_boxes(ts.heatmap, ts.offset, ts.size, opts);
    const auto heads = render_head_maps(ts);
    decode_3d(dets, heads.depth ? &*heads.depth : nullptr, heads.dims ? &*heads.dims : nullptr,
              heads.orientation ? &*heads.orientation : nullptr);
    for (auto& d : dets) {
      d.image_id = im.id;
      d = to_input_space(d, cfg.stride);
    }
    results[k] = {std::move(dets), ts.collisions.size()};
  });

  json images = json::array();
  std::vector<Detection> all;
  std::size_t n_center = 0;
  for (std::size_t k = 0; k < ds.images.size(); ++k) {
    std::vector<GroundTruth> image_gts;
    for (auto a : by_image[k]) image_gts.push_back(gts[a]);
    const auto r = evaluate(results[k].dets, image_gts, classes, s.iou, s.recall_points);
    images.push_back({{"image_id", ds.images[k].id},
                      {"objects", image_gts.size()},
                      {"detections", results[k].dets.size()},
                      {"missed", r.missed},
                      {"collisions", results[k].collisions},
                      {"map", optional_json(r.mean_ap)}});
    all.insert(all.end(), results[k].dets.begin(), results[k].dets.end());
    n_center += results[k].collisions;
  }
  const auto overall = evaluate(all, gts, classes, s.iou, s.recall_points);
  emit(out, {{"images", images},
             {"map", optional_json(overall.mean_ap)},
             {"objects", gts.size()},
             {"detections", all.size()},
             {"missed", overall.missed},
             {"n_center", n_center}});
  return 0;
}

}  // namespace

int run(int argc, const char* const argv[], std::ostream& out, std::ostream& err) {
  CLI::App app{"Center-point detection targets, losses, decoding and dataset analysis"};
  app.name("cpt");
  app.require_subcommand(1);
  Settings s;

  auto add_stride = [&](CLI::App* c) { c->add_option("--stride", s.stride, "Output stride R")->check(CLI::PositiveNumber); };
  auto add_encoder = [&](CLI::App* c) {
    add_stride(c);
    c->add_option("--classes", s.classes, "Number of classes (default: from dataset)");
    c->add_option("--joints", s.joints, "Joints per person");
    c->add_option("--min-overlap", s.min_overlap, "IoU target for the Gaussian radius");
    c->add_option("--units", s.units, "Size map units")->check(CLI::IsMember({"pixels", "cells"}));
  };
  auto add_decode = [&](CLI::App* c) {
    c->add_option("--top-k", s.top_k, "Peaks kept per image")->check(CLI::PositiveNumber);
    c->add_option("--joint-thresh", s.joint_thresh, "Joint heatmap confidence threshold");
  };
  auto add_loss = [&](CLI::App* c) {
    c->add_option("--alpha", s.alpha, "Focal loss alpha");
    c->add_option("--beta", s.beta, "Focal loss beta");
    c->add_option("--eps", s.eps, "Heatmap clamp");
    c->add_option("--lambda-size", s.lambda_size, "Size loss weight");
    c->add_option("--lambda-off", s.lambda_off, "Offset loss weight");
    c->add_option("--lambda-dep", s.lambda_dep, "Depth loss weight");
    c->add_option("--lambda-dim", s.lambda_dim, "Dimension loss weight");
    c->add_option("--lambda-ori", s.lambda_ori, "Orientation loss weight");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--images", s.synth.images, "Image count");
  synth->add_option("--min-objects", s.synth.min_objects, "Minimum objects per image");
  synth->add_option("--max-objects", s.synth.max_objects, "Maximum objects per image");
  synth->add_option("--width", s.synth.width, "Image width");
  synth->add_option("--height", s.synth.height, "Image height");
  synth->add_option("--classes", s.synth.num_classes, "Class count");
  synth->add_option("--stride", s.synth.stride, "Stride at which centers stay distinct");
  synth->add_option("--collisions", s.synth.collision_pairs, "Same-cell pairs injected per image");
  synth->add_flag("--with-3d", s.synth.with_3d, "Add depth, dimensions and yaw");
  synth->add_option("--joints", s.synth.num_joints, "Keypoints per object");
  synth->add_option("--seed", s.seed, "Random seed");
  synth->add_option("-o,--out", s.out_path, "Output file (default: stdout)");

  auto* encode_cmd = app.add_subcommand("encode", "Encode a dataset into dense training targets");
  encode_cmd->add_option("dataset", s.dataset, "Dataset JSON")->required();
  encode_cmd->add_option("-o,--out", s.out_path, "Output directory")->required();
  add_encoder(encode_cmd);

  auto* decode_cmd = app.add_subcommand("decode", "Decode head tensors into JSON-lines detections");
  decode_cmd->add_option("dirs", s.inputs, "Directories of head tensors")->required();
  add_stride(decode_cmd);
  decode_cmd->add_option("--units", s.units, "Size map units")->check(CLI::IsMember({"pixels", "cells"}));
  decode_cmd->add_option("--output-space", s.output_space, "cells or pixels");
  decode_cmd->add_option("--image-id", s.image_id, "Image id to stamp on detections");
  add_decode(decode_cmd);

  auto* loss_cmd = app.add_subcommand("loss", "Evaluate the training objective on predicted heads");
  loss_cmd->add_option("--targets", s.targets, "Directory written by encode")->required();
  loss_cmd->add_option("--pred", s.pred, "Directory of predicted head tensors")->required();
  loss_cmd->add_option("--image-id", s.image_id, "Image to evaluate");
  loss_cmd->add_option("--grad-out", s.grad_out, "Write per-head gradients here");
  add_loss(loss_cmd);

  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare analytic loss gradients with finite differences");
  grad_cmd->add_option("--seed", s.seed, "First seed");
  grad_cmd->add_option("--trials", s.trials, "Number of seeds");
  grad_cmd->add_option("--step", s.step, "Finite-difference step");
  grad_cmd->add_option("--tolerance", s.tolerance, "Max relative error");
  grad_cmd->add_option("--alpha", s.alpha, "Focal loss alpha");
  grad_cmd->add_option("--beta", s.beta, "Focal loss beta");

  auto* coll_cmd = app.add_subcommand("collisions", "Count center-point and IoU collisions");
  coll_cmd->add_option("dataset", s.dataset, "Dataset JSON")->required();
  add_stride(coll_cmd);
  coll_cmd->add_option("--thresholds", s.thresholds, "IoU thresholds")->delimiter(',');
  coll_cmd->add_flag("--oracle", s.oracle, "Use the direct pairwise definitions");
  coll_cmd->add_flag("--no-pairs", s.no_pairs, "Omit per-pair listings");

  auto* anchor_cmd = app.add_subcommand("anchors", "Count forced anchor assignments");
  anchor_cmd->add_option("dataset", s.dataset, "Dataset JSON")->required();
  anchor_cmd->add_option("--iou", s.iou, "Assignment IoU threshold");
  anchor_cmd->add_flag("--oracle", s.oracle, "Enumerate every anchor");

  auto* nms_cmd = app.add_subcommand("nms", "Greedy per-class IoU suppression over JSON-lines detections");
  nms_cmd->add_option("detections", s.detections, "Detections file, '-' for stdin");
  nms_cmd->add_option("--iou", s.iou, "IoU threshold");

  auto* eval_cmd = app.add_subcommand("eval", "Average precision of detections against a dataset");
  eval_cmd->add_option("detections", s.detections, "Detections file, '-' for stdin")->required();
  eval_cmd->add_option("dataset", s.dataset, "Dataset JSON")->required();
  eval_cmd->add_option("--iou", s.iou, "Match IoU threshold");
  eval_cmd->add_option("--recall-points", s.recall_points, "11 or 101");
  add_stride(eval_cmd);

  auto* rt_cmd = app.add_subcommand("roundtrip", "Encode, decode the ground-truth heads and evaluate");
  rt_cmd->add_option("dataset", s.dataset, "Dataset JSON")->required();
  add_encoder(rt_cmd);
  add_decode(rt_cmd);
  rt_cmd->add_option("--iou", s.iou, "Match IoU threshold");
  rt_cmd->add_option("--recall-points", s.recall_points, "11 or 101");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(s, out);
    if (encode_cmd->parsed()) return cmd_encode(s, out, err);
    if (decode_cmd->parsed()) return cmd_decode(s, *decode_cmd, out);
    if (loss_cmd->parsed()) return cmd_loss(s, out);
    if (grad_cmd->parsed()) return cmd_gradcheck(s, out);
    if (coll_cmd->parsed()) return cmd_collisions(s, out, err);
    if (anchor_cmd->parsed()) return cmd_anchors(s, out, err);
    if (nms_cmd->parsed()) return cmd_nms(s, out);
    if (eval_cmd->parsed()) return cmd_eval(s, out, err);
    if (rt_cmd->parsed()) return cmd_roundtrip(s, out, err);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const InvariantError& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
  err << app.help();
  return 1;
}

}  // namespace cpt::cli
