#include "fsrl/cli.hpp"

#include "fsrl/bounds.hpp"
#include "fsrl/counterfactual.hpp"
#include "fsrl/dataset.hpp"
#include "fsrl/errors.hpp"
#include "fsrl/knowledge.hpp"
#include "fsrl/matrix_io.hpp"
#include "fsrl/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#ifndef FSRL_VERSION
#define FSRL_VERSION "0.0.0"
#endif
#ifndef FSRL_GIT_DESCRIBE
#define FSRL_GIT_DESCRIBE "unknown"
#endif

namespace fsrl {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

constexpr const char* kDefaultOut = "fsrl-out";

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '"', '\'');
    return s;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

void write_json(const fs::path& path, const ojson& j) { write_text(path, j.dump(2) + "\n"); }

fs::path prepare_out(const std::string& out) {
    const fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + out + ": " + ec.message());
    return dir;
}

void write_manifest(const fs::path& dir, const std::string& command, ojson details) {
    ojson m;
    m["tool"] = "fsrl";
    m["version"] = version_string();
    m["command"] = command;
    for (auto it = details.begin(); it != details.end(); ++it) m[it.key()] = it.value();
    write_json(dir / "manifest.json", m);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) parts.push_back(item);
    return parts;
}

// Training configuration assembled from defaults, an optional JSON file, --seed, one flag
// per dotted config key and the ablation shortcuts, in that order.
struct TrainFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    CLI::Option* seed_option = nullptr;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    bool no_ccl = false;
    bool no_knowledge = false;
    bool no_clustering = false;
    bool no_counterfactual = false;
    bool random_mask = false;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "JSON file with dotted config keys");
        seed_option = app->add_option("--seed", seed, "global seed for the data, augmentation and init streams");
        const ojson defaults = config_to_json(TrainConfig{});
        for (const auto& k : config_keys()) {
            const auto& d = defaults.at(k.key);
            const std::string shown = d.is_string() ? d.get<std::string>() : d.dump();
            options[k.key] = app->add_option("--" + k.key, values[k.key], k.help)->default_str(shown);
        }
        app->add_flag("--no-ccl", no_ccl, "disable the contrastive loss");
        app->add_flag("--no-knowledge-matrix", no_knowledge, "use an all-ones knowledge matrix");
        app->add_flag("--no-clustering", no_clustering, "use every bank entry as a prototype");
        app->add_flag("--no-counterfactual", no_counterfactual, "disable counterfactual augmentation");
        app->add_flag("--random-mask-baseline", random_mask, "erase random rectangles instead");
    }

    TrainConfig resolve() const {
        TrainConfig c = config_path.empty() ? TrainConfig{} : load_config(config_path);
        if (seed_option->count()) c.seed_data = c.seed_augmentation = c.seed_init = seed;
        for (const auto& k : config_keys())
            if (options.at(k.key)->count()) set_config_value(c, k.key, values.at(k.key));
        if (no_ccl) c.use_ccl = false;
        if (no_knowledge) c.use_knowledge_matrix = false;
        if (no_clustering) c.use_clustering = false;
        if (no_counterfactual) c.use_counterfactual = false;
        if (random_mask) c.use_random_mask_baseline = true;
        c.validate();
        return c;
    }

    bool explicit_key(const std::string& key) const {
        if (options.at(key)->count()) return true;
        if (config_path.empty()) return false;
        std::ifstream in(config_path);
        const auto j = nlohmann::json::parse(in, nullptr, false);
        return j.is_object() && j.contains(key);
    }
};

ojson seeds_json(const TrainConfig& c) {
    return {{"data", c.seed_data}, {"augmentation", c.seed_augmentation}, {"init", c.seed_init}};
}

// ---- knowledge ----

struct KnowledgeFlags {
    int which = 3;
    std::string labels, embeddings, text, base, categories, dataset, model, out = kDefaultOut;
    int clusters = 5;
    std::uint64_t seed = 0;
};

std::vector<std::string> embedding_manifest_names(const fs::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw IoError("cannot open " + manifest.string());
    const auto j = ojson::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("categories") || !j["categories"].is_object())
        throw ValidationError(manifest.string() + ": missing \"categories\" object");
    std::vector<std::string> names;
    for (auto it = j["categories"].begin(); it != j["categories"].end(); ++it) names.push_back(it.key());
    return names;
}

void run_knowledge(const KnowledgeFlags& f, std::ostream& out) {
    const KnowledgeCase which = parse_knowledge_case(f.which);
    const fs::path dir = prepare_out(f.out);
    KnowledgeMatrix zeta = KnowledgeMatrix::all_ones({"_"});
    ojson inputs;

    if (!f.dataset.empty()) {
        const Dataset ds = load_dataset(f.dataset);
        std::optional<ToyModelParams> params;
        if (!f.model.empty()) params = load_params(f.model);
        zeta = dataset_knowledge(ds, which, params ? &*params : nullptr, f.clusters, f.seed);
        inputs["dataset"] = f.dataset;
        inputs["model"] = f.model;
    } else {
        KnowledgeInputs in;
        in.clusters = f.clusters;
        in.seed = f.seed;
        std::optional<AttributeLabelFile> labels;
        if (!f.labels.empty()) labels = load_attribute_labels(f.labels);
        if (!f.categories.empty()) {
            in.category_names = split_list(f.categories);
        } else if (labels) {
            in.category_names = labels->names;
        } else if (!f.text.empty()) {
            std::ifstream tin(f.text);
            const auto j = nlohmann::json::parse(tin, nullptr, false);
            if (j.is_discarded() || !j.contains("category_names"))
                throw ValidationError(f.text + ": cannot determine category names");
            in.category_names = j["category_names"].get<std::vector<std::string>>();
        } else if (!f.embeddings.empty()) {
            in.category_names = embedding_manifest_names(f.embeddings);
        } else {
            throw ValidationError("knowledge needs --labels, --embeddings, --text or --dataset");
        }
        if (labels) {
            for (std::size_t i = 0; i < labels->names.size(); ++i) {
                const auto pos = std::find(in.category_names.begin(), in.category_names.end(), labels->names[i]);
                if (pos == in.category_names.end())
                    throw ValidationError("label file names unknown category '" + labels->names[i] + "'");
                AttributeLabelVector v = labels->labels[i];
                v.category_id = static_cast<int>(pos - in.category_names.begin());
                in.labels[v.category_id] = v;
            }
        }
        if (!f.embeddings.empty()) in.embeddings = load_embedding_sets(f.embeddings, in.category_names);
        if (!f.text.empty()) in.text = load_text_table(f.text, in.category_names);
        if (which == KnowledgeCase::Mixed) {
            const auto base_names = f.base.empty() ? std::vector<std::string>{} : split_list(f.base);
            if (base_names.empty()) {
                for (const auto& [id, set] : in.embeddings) in.base_categories.insert(id);
            } else {
                for (const auto& name : base_names) {
                    const auto pos = std::find(in.category_names.begin(), in.category_names.end(), name);
                    if (pos == in.category_names.end()) throw ValidationError("unknown base category '" + name + "'");
                    in.base_categories.insert(static_cast<int>(pos - in.category_names.begin()));
                }
            }
        }
        zeta = build_knowledge_matrix(which, in);
        inputs["labels"] = f.labels;
        inputs["embeddings"] = f.embeddings;
        inputs["text"] = f.text;
        inputs["base"] = f.base;
    }
    zeta.save_csv(dir / "knowledge.csv");
    write_manifest(dir, "knowledge",
                   {{"case", f.which}, {"clusters", f.clusters}, {"seeds", {{"kmeans", f.seed}}}, {"inputs", inputs}});
    out << (dir / "knowledge.csv").string() << '\n';
}

// ---- dataset ----

struct DatasetFlags {
    DatasetConfig config;
    std::string attributes, out = kDefaultOut;
};

ojson dataset_config_json(const DatasetConfig& c) {
    return {{"num_base", c.num_base},
            {"num_novel", c.num_novel},
            {"k_shot", c.k_shot},
            {"base_per_category", c.base_per_category},
            {"test_per_category", c.test_per_category},
            {"image_size", c.image_size},
            {"seed", c.seed},
            {"part_dropout", c.part_dropout},
            {"jitter", c.jitter},
            {"noise", c.noise}};
}

void run_dataset(DatasetFlags f, std::ostream& out) {
    const fs::path dir = prepare_out(f.out);
    if (!f.attributes.empty()) f.config.attributes = load_attribute_labels(f.attributes);
    const Dataset ds = generate_dataset(f.config);
    save_dataset(dir, ds);
    save_attribute_labels(dir / "attributes.json", ds.attribute_file());
    ojson cfg = dataset_config_json(f.config);
    cfg["attributes"] = f.attributes;
    write_manifest(dir, "dataset", {{"config", cfg}, {"seeds", {{"dataset", f.config.seed}}}});
    out << "base " << ds.base.size() << " novel " << ds.novel.size() << " test " << ds.test.size() << '\n';
}

// ---- train-base ----

struct ModelFlags {
    std::string dataset, model, knowledge, out = kDefaultOut;
};

void run_train_base(const TrainFlags& tf, const ModelFlags& f, std::ostream& out) {
    TrainConfig c = tf.resolve();
    c.stage = "base";
    const Dataset ds = load_dataset(f.dataset);
    const fs::path dir = prepare_out(f.out);
    const BaseTrainResult r = train_base(c, ds);
    save_params(dir / "model", r.params);
    std::ostringstream losses;
    for (std::size_t i = 0; i < r.losses.size(); ++i) {
        ojson line{{"iteration", i}, {"cls", r.losses[i]}};
        losses << line.dump() << '\n';
    }
    write_text(dir / "metrics.jsonl", losses.str());
    ojson eval = eval_to_json(evaluate(r.params, ds), ds);
    eval["train_accuracy"] = r.train_accuracy;
    write_json(dir / "eval.json", eval);
    write_manifest(dir, "train-base", {{"config", config_to_json(c)}, {"seeds", seeds_json(c)}, {"inputs", {{"dataset", f.dataset}}}});
    out << "train accuracy " << format_double(r.train_accuracy) << '\n';
}

// ---- fine-tune ----

KnowledgeMatrix resolve_knowledge(const TrainConfig& c, const ModelFlags& f, const Dataset& ds,
                                  const ToyModelParams& params) {
    if (!f.knowledge.empty()) {
        KnowledgeMatrix z = KnowledgeMatrix::load_csv(f.knowledge);
        if (z.category_names() != ds.names)
            throw ValidationError("knowledge matrix categories do not match the dataset's");
        return z;
    }
    return dataset_knowledge(ds, parse_knowledge_case(c.knowledge_case), &params, c.knowledge_clusters, c.seed_data);
}

void run_fine_tune(const TrainFlags& tf, const ModelFlags& f, std::ostream& out) {
    TrainConfig c = tf.resolve();
    c.stage = "finetune";
    const Dataset ds = load_dataset(f.dataset);
    if (!tf.explicit_key("k_shot")) c.k_shot = ds.config.k_shot;
    const ToyModelParams params = load_params(f.model);
    const KnowledgeMatrix zeta = resolve_knowledge(c, f, ds, params);
    const fs::path dir = prepare_out(f.out);
    const FineTuneResult r = fine_tune(params, c, ds, zeta);
    zeta.save_csv(dir / "knowledge.csv");
    write_metrics_jsonl(dir / "metrics.jsonl", r.metrics.iterations);
    write_json(dir / "eval.json", eval_to_json(r.metrics.final, ds));
    save_params(dir / "model", r.params);
    r.bank.save(dir / "bank");
    write_manifest(dir, "fine-tune",
                   {{"config", config_to_json(c)},
                    {"seeds", seeds_json(c)},
                    {"inputs", {{"dataset", f.dataset}, {"model", f.model}, {"knowledge", f.knowledge}}}});
    out << "novel accuracy " << format_double(r.metrics.final.novel_accuracy) << '\n';
}

// ---- augment-preview ----

struct PreviewFlags {
    std::string split = "novel";
    int index = 0;
};

void run_augment_preview(const TrainFlags& tf, const ModelFlags& f, const PreviewFlags& p, std::ostream& out) {
    TrainConfig c = tf.resolve();
    const Dataset ds = load_dataset(f.dataset);
    const ToyModelParams params = load_params(f.model);
    KnowledgeMatrix zeta = resolve_knowledge(c, f, ds, params);
    if (!c.use_knowledge_matrix) zeta = KnowledgeMatrix::all_ones(zeta.category_names());
    const auto& split = p.split == "base" ? ds.base : p.split == "novel" ? ds.novel : p.split == "test" ? ds.test
                                                                                                       : ds.base;
    if (p.split != "base" && p.split != "novel" && p.split != "test")
        throw ValidationError("--split must be base, novel or test");
    if (p.index < 0 || p.index >= static_cast<int>(split.size()))
        throw ValidationError("--index " + std::to_string(p.index) + " outside the " + p.split + " split");
    const ToyImage& sample = split[static_cast<std::size_t>(p.index)];
    const fs::path dir = prepare_out(f.out);

    Rng rng(c.seed_augmentation, 0x70726576);  // "prev"
    const ToyModelAttribution source(params);
    AugmentTrace trace;
    const Box box{0, 0, sample.image.height, sample.image.width};
    const AugmentedSample aug =
        augment(sample.image, sample.label, box, source, zeta, {c.k_e, c.threshold}, rng, &trace);

    write_ppm(dir / "original.ppm", sample.image);
    write_pgm(dir / "attribution_class.pgm", trace.a_c);
    write_pgm(dir / "attribution_counter.pgm", trace.a_counter);
    write_pgm(dir / "counterfactual.pgm", trace.counterfactual);
    AttributionMap mask = trace.mask.grid.cast<double>();
    write_pgm(dir / "mask.pgm", mask);
    write_ppm(dir / "augmented.ppm", aug.image);

    ojson side;
    side["category"] = ds.names[static_cast<std::size_t>(sample.label)];
    side["candidates"] = ojson::array();
    for (int cand : trace.candidates) side["candidates"].push_back(ds.names[static_cast<std::size_t>(cand)]);
    side["counter_category"] = ds.names[static_cast<std::size_t>(trace.counter_category)];
    side["threshold"] = c.threshold;
    side["k_e"] = c.k_e;
    side["fill_seed"] = trace.fill_seed;
    side["erased_pixels"] = trace.erased_pixels;
    write_json(dir / "preview.json", side);
    write_manifest(dir, "augment-preview",
                   {{"config", config_to_json(c)},
                    {"seeds", seeds_json(c)},
                    {"inputs", {{"dataset", f.dataset}, {"model", f.model}, {"split", p.split}, {"index", p.index}}}});
    out << "counter category " << side["counter_category"].get<std::string>() << ", erased " << trace.erased_pixels
        << " pixels\n";
}

// ---- bounds ----

struct BoundsFlags {
    std::string formula = "thm2", params, check = "thm1-lambda-c", out = kDefaultOut;
    std::vector<std::string> axes;
};

std::vector<SweepAxis> parse_axes(const std::vector<std::string>& specs) {
    std::vector<SweepAxis> axes;
    for (const auto& s : specs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ValidationError("--axis expects field=v1,v2,...; got '" + s + "'");
        SweepAxis a{s.substr(0, eq), {}};
        for (const auto& v : split_list(s.substr(eq + 1))) a.values.push_back(parse_double(v));
        axes.push_back(std::move(a));
    }
    return axes;
}

void run_bounds_eval(const BoundsFlags& f, std::ostream& out) {
    const Formula formula = parse_formula(f.formula);
    const BoundInputs in = f.params.empty() ? BoundInputs{} : load_bound_inputs(f.params);
    const fs::path dir = prepare_out(f.out);
    const auto cols = evaluate_formula(formula, in);
    ojson result;
    if (formula == Formula::Theorem2) {
        const Theorem2Result r = theorem2_compare(in);
        out << "sup_with " << format_double(r.sup_with) << '\n'
            << "intermediate " << format_double(r.intermediate) << '\n'
            << "sup_without " << format_double(r.sup_without) << '\n'
            << "holds " << (r.holds ? "true" : "false") << '\n';
        result = {{"sup_with", r.sup_with}, {"intermediate", r.intermediate}, {"sup_without", r.sup_without}, {"holds", r.holds}};
    } else {
        out << format_double(cols.front().second) << '\n';
        result = {{"value", cols.front().second}};
    }
    write_json(dir / "bound.json", result);
    write_manifest(dir, "bounds eval", {{"formula", f.formula}, {"params", bounds_to_json(in)}});
}

void run_bounds_sweep(const BoundsFlags& f, std::ostream& out) {
    const Formula formula = parse_formula(f.formula);
    const BoundInputs base = f.params.empty() ? BoundInputs{} : load_bound_inputs(f.params);
    const auto axes = parse_axes(f.axes);
    const std::vector<BoundInputs> points =
        axes.empty() && formula == Formula::Theorem2 ? theorem2_default_grid() : sweep_grid(base, axes);
    const fs::path dir = prepare_out(f.out);
    const fs::path csv = dir / ("sweep_" + f.formula + ".csv");
    write_text(csv, sweep_csv(formula, points));
    ojson ax = ojson::array();
    for (const auto& a : axes) ax.push_back({{"field", a.field}, {"values", a.values}});
    write_manifest(dir, "bounds sweep", {{"formula", f.formula}, {"params", bounds_to_json(base)}, {"axes", ax}});
    out << csv.string() << " (" << points.size() << " points)\n";
}

void run_bounds_monotonicity(const BoundsFlags& f, std::ostream& out) {
    const MonotonicityReport report = monotonicity_check(parse_monotonicity_kind(f.check));
    const fs::path dir = prepare_out(f.out);
    const ojson j = report_to_json(report);
    write_json(dir / "monotonicity.json", j);
    write_manifest(dir, "bounds monotonicity", {{"check", f.check}});
    out << "curves " << report.curves << " inside " << report.inside << " outside " << report.outside
        << " counterexamples " << report.counterexamples.size() << '\n';
}

// ---- export ----

struct ExportFlags {
    std::string dataset, matrix, to = "csv", out = kDefaultOut;
};

void run_export_dataset(const ExportFlags& f, std::ostream& out) {
    const Dataset ds = load_dataset(f.dataset);
    const fs::path dir = prepare_out(f.out);
    export_dataset_images(dir / "images", ds);
    write_manifest(dir, "export dataset", {{"inputs", {{"dataset", f.dataset}}}});
    out << (dir / "images").string() << '\n';
}

void run_export_matrix(const ExportFlags& f, std::ostream& out) {
    if (f.to != "csv" && f.to != "binary") throw ValidationError("--to must be csv or binary");
    const Eigen::MatrixXd m = read_matrix(f.matrix);
    const fs::path dir = prepare_out(f.out);
    const fs::path target = dir / (fs::path(f.matrix).stem().string() + (f.to == "csv" ? ".csv" : ".fmat"));
    write_matrix(target, m);
    write_manifest(dir, "export matrix", {{"inputs", {{"matrix", f.matrix}}}, {"to", f.to}});
    out << target.string() << '\n';
}

int fail(std::ostream& err, const char* kind, const std::string& msg) {
    err << "error kind=" << kind << " msg=\"" << one_line(msg) << "\"\n";
    return 1;
}

}  // namespace

std::string version_string() { return std::string(FSRL_VERSION) + "+" + FSRL_GIT_DESCRIBE; }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Few-shot contrastive representation learning toolkit", "fsrl"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);

    KnowledgeFlags kf;
    auto* knowledge = app.add_subcommand("knowledge", "build a knowledge matrix from side information");
    knowledge->add_option("--case", kf.which, "side-information case (1-5)")->capture_default_str();
    knowledge->add_option("--labels", kf.labels, "attribute label JSON {name: [0/1,...]}");
    knowledge->add_option("--embeddings", kf.embeddings, "embedding-set manifest JSON");
    knowledge->add_option("--text", kf.text, "text embedding table manifest JSON");
    knowledge->add_option("--base", kf.base, "comma-separated base categories (mixed case)");
    knowledge->add_option("--categories", kf.categories, "comma-separated category order");
    knowledge->add_option("--dataset", kf.dataset, "toy dataset directory to take attributes from");
    knowledge->add_option("--model", kf.model, "model checkpoint stem for embedding cases with --dataset");
    knowledge->add_option("--clusters", kf.clusters, "k-means centers per category")->capture_default_str();
    knowledge->add_option("--seed", kf.seed, "k-means seed")->capture_default_str();
    knowledge->add_option("--out", kf.out, "output directory")->capture_default_str();

    DatasetFlags df;
    auto* dataset = app.add_subcommand("dataset", "generate the synthetic shape dataset");
    dataset->add_option("--num-base", df.config.num_base, "base categories")->capture_default_str();
    dataset->add_option("--num-novel", df.config.num_novel, "novel categories")->capture_default_str();
    dataset->add_option("--k-shot", df.config.k_shot, "novel samples per novel category")->capture_default_str();
    dataset->add_option("--base-per-category", df.config.base_per_category, "base samples per base category")
        ->capture_default_str();
    dataset->add_option("--test-per-category", df.config.test_per_category, "test samples per category")
        ->capture_default_str();
    dataset->add_option("--image-size", df.config.image_size, "image side in pixels")->capture_default_str();
    dataset->add_option("--part-dropout", df.config.part_dropout, "probability of omitting a part")
        ->capture_default_str();
    dataset->add_option("--jitter", df.config.jitter, "maximum shift in pixels")->capture_default_str();
    dataset->add_option("--noise", df.config.noise, "pixel noise standard deviation")->capture_default_str();
    dataset->add_option("--attributes", df.attributes, "attribute label JSON overriding the shipped table");
    dataset->add_option("--seed", df.config.seed, "dataset seed")->capture_default_str();
    dataset->add_option("--out", df.out, "output directory")->capture_default_str();

    TrainFlags base_train, fine, preview_train;
    ModelFlags base_model, fine_model, preview_model;
    auto* train = app.add_subcommand("train-base", "train the model on the base categories");
    base_train.attach(train);
    train->add_option("--dataset", base_model.dataset, "dataset directory")->required();
    train->add_option("--out", base_model.out, "output directory")->capture_default_str();

    auto* tune = app.add_subcommand("fine-tune", "fine-tune a base model on base and novel shots");
    fine.attach(tune);
    tune->add_option("--dataset", fine_model.dataset, "dataset directory")->required();
    tune->add_option("--model", fine_model.model, "base model checkpoint stem")->required();
    tune->add_option("--knowledge", fine_model.knowledge, "knowledge matrix CSV (built from the dataset otherwise)");
    tune->add_option("--out", fine_model.out, "output directory")->capture_default_str();

    PreviewFlags pf;
    auto* preview = app.add_subcommand("augment-preview", "dump the stages of one counterfactual augmentation");
    preview_train.attach(preview);
    preview->add_option("--dataset", preview_model.dataset, "dataset directory")->required();
    preview->add_option("--model", preview_model.model, "model checkpoint stem")->required();
    preview->add_option("--knowledge", preview_model.knowledge, "knowledge matrix CSV");
    preview->add_option("--split", pf.split, "base, novel or test")->capture_default_str();
    preview->add_option("--index", pf.index, "sample index within the split")->capture_default_str();
    preview->add_option("--out", preview_model.out, "output directory")->capture_default_str();

    BoundsFlags bf;
    auto* bounds = app.add_subcommand("bounds", "evaluate generalization-bound formulas");
    bounds->require_subcommand(1);
    auto* eval = bounds->add_subcommand("eval", "evaluate one formula");
    eval->add_option("--formula", bf.formula, "lemma1, thm1, prop1 or thm2")->capture_default_str();
    eval->add_option("--params", bf.params, "JSON file of bound inputs");
    eval->add_option("--out", bf.out, "output directory")->capture_default_str();
    auto* sweep = bounds->add_subcommand("sweep", "evaluate a formula over a parameter grid");
    sweep->add_option("--formula", bf.formula, "lemma1, thm1, prop1 or thm2")->capture_default_str();
    sweep->add_option("--params", bf.params, "JSON file of base inputs");
    sweep->add_option("--axis", bf.axes, "field=v1,v2,... (repeatable)");
    sweep->add_option("--out", bf.out, "output directory")->capture_default_str();
    auto* mono = bounds->add_subcommand("monotonicity", "check monotonicity claims on a grid");
    mono->add_option("--check", bf.check, "thm1-lambda-c or prop1-k-e")->capture_default_str();
    mono->add_option("--out", bf.out, "output directory")->capture_default_str();

    ExportFlags ef;
    auto* exp = app.add_subcommand("export", "convert artifacts for inspection");
    exp->require_subcommand(1);
    auto* exp_dataset = exp->add_subcommand("dataset", "write dataset images as portable pixmaps");
    exp_dataset->add_option("--dataset", ef.dataset, "dataset directory")->required();
    exp_dataset->add_option("--out", ef.out, "output directory")->capture_default_str();
    auto* exp_matrix = exp->add_subcommand("matrix", "convert a matrix between CSV and the binary format");
    exp_matrix->add_option("--in", ef.matrix, "input matrix (.csv or binary)")->required();
    exp_matrix->add_option("--to", ef.to, "csv or binary")->capture_default_str();
    exp_matrix->add_option("--out", ef.out, "output directory")->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion& e) {
        out << version_string() << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        return fail(err, "usage", e.what());
    }

    try {
        if (*knowledge) run_knowledge(kf, out);
        else if (*dataset) run_dataset(df, out);
        else if (*train) run_train_base(base_train, base_model, out);
        else if (*tune) run_fine_tune(fine, fine_model, out);
        else if (*preview) run_augment_preview(preview_train, preview_model, pf, out);
        else if (*eval) run_bounds_eval(bf, out);
        else if (*sweep) run_bounds_sweep(bf, out);
        else if (*mono) run_bounds_monotonicity(bf, out);
        else if (*exp_dataset) run_export_dataset(ef, out);
        else if (*exp_matrix) run_export_matrix(ef, out);
    } catch (const ValidationError& e) {
        return fail(err, "validation", e.what());
    } catch (const IoError& e) {
        return fail(err, "io", e.what());
    } catch (const nlohmann::json::exception& e) {
        return fail(err, "validation", e.what());
    } catch (const std::exception& e) {
        return fail(err, "internal", e.what());
    }
    return 0;
}

}  // namespace fsrl
