#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ukan/checkpoint.hpp"
#include "ukan/data.hpp"
#include "ukan/kan.hpp"
#include "ukan/losses.hpp"
#include "ukan/metrics.hpp"
#include "ukan/model.hpp"
#include "ukan/nifti.hpp"
#include "ukan/optim.hpp"
#include "ukan/train.hpp"

namespace py = pybind11;
using namespace ukan;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

Extents extents_of(const py::array& a) {
    if (a.ndim() != 3) throw ShapeError("expected a 3-D array [D, H, W]");
    return {a.shape(0), a.shape(1), a.shape(2)};
}

Spacing spacing_of(const std::array<double, 3>& s) { return {s[0], s[1], s[2]}; }

Mask mask_of(const U8Array& a) {
    Mask m(a.data(), a.data() + a.size());
    for (auto& v : m) v = v != 0;
    return m;
}

template <typename T>
py::array_t<T> to_array(const std::vector<T>& v, std::vector<py::ssize_t> shape) {
    py::array_t<T> out(shape);
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::dict sample_dict(const SampleVolume& s) {
    py::dict d;
    d["case_id"] = s.case_id;
    d["image"] = to_array(s.image, {kModalities, s.ext.d, s.ext.h, s.ext.w});
    d["labels"] = to_array(s.labels, {s.ext.d, s.ext.h, s.ext.w});
    d["spacing"] = py::make_tuple(s.spacing.d, s.spacing.h, s.spacing.w);
    return d;
}

SampleVolume sample_of(const F32Array& image, const U8Array& labels, const std::string& case_id) {
    if (image.ndim() != 4 || image.shape(0) != kModalities) throw ShapeError("image must be [4, D, H, W]");
    SampleVolume s;
    s.case_id = case_id;
    s.ext = extents_of(labels);
    if (image.shape(1) != s.ext.d || image.shape(2) != s.ext.h || image.shape(3) != s.ext.w)
        throw ShapeError("image and labels extents differ");
    s.image.assign(image.data(), image.data() + image.size());
    s.labels.assign(labels.data(), labels.data() + labels.size());
    s.validate();
    return s;
}

py::dict stats_dict(const EpochStats& s) {
    py::dict d;
    d["epoch"] = s.epoch;
    d["lr"] = s.lr;
    d["total"] = s.total;
    d["ce"] = s.ce;
    d["dice"] = s.dice;
    d["alpha"] = s.alpha;
    d["train_soft_dice"] = s.train_soft_dice;
    d["val_soft_dice"] = s.val_soft_dice;
    return d;
}

py::dict report_dict(const MetricsReport& r) {
    py::dict out;
    for (int k = 0; k < 5; ++k) {
        py::dict reg;
        reg["dice"] = py::make_tuple(r.dice[k].mean, r.dice[k].ci95);
        reg["iou"] = py::make_tuple(r.iou[k].mean, r.iou[k].ci95);
        reg["hd95"] = py::make_tuple(r.hd95[k].mean, r.hd95[k].ci95);
        out[region_name(kRegions[k])] = reg;
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Volumetric tumour segmentation core";

    // Translators run newest first, so the subclass is registered last.
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

    m.def(
        "generate_phantom",
        [](std::uint64_t seed, std::int64_t size, const std::string& case_id) {
            return sample_dict(generate_phantom(seed, {size, size, size}, case_id));
        },
        py::arg("seed"), py::arg("size") = 32, py::arg("case_id") = "");

    m.def(
        "lr_schedule",
        [](std::int64_t epoch, std::int64_t epochs, std::int64_t warmup, double lr_start, double lr_peak) {
            return lr_schedule(epoch, ScheduleConfig{epochs, warmup, lr_start, lr_peak});
        },
        py::arg("epoch"), py::arg("epochs") = 50, py::arg("warmup_epochs") = 30, py::arg("lr_start") = 0.005,
        py::arg("lr_peak") = 0.01);

    m.def("dynamic_weight", &dynamic_weight, py::arg("ce"), py::arg("dice"),
          "Returns (alpha, total) with alpha = ce / (ce + dice).");

    m.def(
        "bspline_basis",
        [](double x, int intervals, int order) {
            SplineGrid g;
            g.intervals = intervals;
            g.order = order;
            g.validate();
            std::vector<double> out(g.basis_count());
            bspline_basis(x, g, out);
            return out;
        },
        py::arg("x"), py::arg("intervals") = 5, py::arg("order") = 3);

    m.def(
        "dice_iou",
        [](const U8Array& pred, const U8Array& truth) {
            const DiceIou r = dice_iou(mask_of(pred), mask_of(truth));
            return py::make_tuple(r.dice, r.iou);
        },
        py::arg("pred"), py::arg("truth"));

    m.def(
        "hd95",
        [](const U8Array& pred, const U8Array& truth, std::array<double, 3> spacing) {
            const Extents e = extents_of(pred);
            if (extents_of(truth).voxels() != e.voxels()) throw ShapeError("mask extents differ");
            return hd95(mask_of(pred), mask_of(truth), e, spacing_of(spacing));
        },
        py::arg("pred"), py::arg("truth"), py::arg("spacing") = std::array<double, 3>{1, 1, 1});

    m.def(
        "case_metrics",
        [](const U8Array& predicted, const U8Array& truth, std::array<double, 3> spacing) {
            const Extents e = extents_of(truth);
            const std::vector<std::uint8_t> p(predicted.data(), predicted.data() + predicted.size()),
                t(truth.data(), truth.data() + truth.size());
            const CaseMetrics c = case_metrics("", p, t, e, spacing_of(spacing));
            py::dict out;
            for (int k = 0; k < 5; ++k)
                out[region_name(kRegions[k])] = py::make_tuple(c.regions[k].dice, c.regions[k].iou, c.regions[k].hd95);
            return out;
        },
        py::arg("predicted"), py::arg("truth"), py::arg("spacing") = std::array<double, 3>{1, 1, 1});

    m.def(
        "read_nifti",
        [](const std::string& path) {
            const NiftiVolume v = read_nifti(path);
            const auto& pd = v.header.pixdim;
            return py::make_tuple(to_array(v.voxels, {v.ext.d, v.ext.h, v.ext.w}),
                                  py::make_tuple(double(pd[3]), double(pd[2]), double(pd[1])));
        },
        py::arg("path"), "Returns (voxels [D, H, W] float64, spacing (d, h, w)).");

    m.def(
        "write_nifti",
        [](const std::string& path, const F64Array& voxels, std::array<double, 3> spacing, const std::string& dtype) {
            static const std::map<std::string, NiftiType> types{{"uint8", NiftiType::uint8},
                                                                {"int16", NiftiType::int16},
                                                                {"float32", NiftiType::float32},
                                                                {"float64", NiftiType::float64}};
            const auto it = types.find(dtype);
            if (it == types.end()) throw Error("unsupported NIfTI dtype '" + dtype + "'");
            NiftiWriteOptions o;
            o.datatype = it->second;
            o.spacing = spacing_of(spacing);
            write_nifti(path, std::vector<double>(voxels.data(), voxels.data() + voxels.size()), extents_of(voxels), o);
        },
        py::arg("path"), py::arg("voxels"), py::arg("spacing") = std::array<double, 3>{1, 1, 1},
        py::arg("dtype") = "float32");

    m.def(
        "model_counts",
        [](const std::string& variant, std::int64_t size, std::int64_t batch) {
            ModelConfig c;
            c.variant = parse_variant(variant);
            const NetworkGraph g = build_model(c);
            return py::make_tuple(count_params(g), count_flops(g, {batch, c.in_channels, size, size, size}).total);
        },
        py::arg("variant") = "ukan_ep_eca_after_pfa", py::arg("size") = 32, py::arg("batch") = 1,
        "Returns (parameters, FLOPs) of the default configuration.");

    m.def(
        "train",
        [](const std::string& config_path, std::optional<std::string> resume, std::optional<py::function> on_epoch) {
            const TrainConfig cfg = TrainConfig::load(config_path);
            TrainOptions opts;
            opts.resume = std::move(resume);
            if (on_epoch)
                opts.on_epoch = [f = *on_epoch](const EpochStats& s) {
                    py::gil_scoped_acquire gil;
                    f(stats_dict(s));
                };
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = train(cfg, opts);
            }
            py::list history;
            for (const auto& s : r.history) history.append(stats_dict(s));
            return py::make_tuple(r.final_checkpoint, history);
        },
        py::arg("config_path"), py::arg("resume") = py::none(), py::arg("on_epoch") = py::none(),
        "Trains from a key = value config; returns (final checkpoint path, per-epoch stats).");

    m.def(
        "evaluate",
        [](const std::string& checkpoint, const std::string& manifest, const std::string& out_csv) {
            MetricsReport r;
            {
                py::gil_scoped_release release;
                r = evaluate(checkpoint, manifest, out_csv);
            }
            return report_dict(r);
        },
        py::arg("checkpoint"), py::arg("manifest"), py::arg("out_csv"));

    m.def(
        "predict",
        [](const std::string& checkpoint, const F32Array& image) {
            const NetworkGraph g = load_model(Checkpoint::load(checkpoint));
            if (image.ndim() != 4) throw ShapeError("image must be [4, D, H, W]");
            U8Array dummy({image.shape(1), image.shape(2), image.shape(3)});
            std::fill(dummy.mutable_data(), dummy.mutable_data() + dummy.size(), 0);
            const SampleVolume s = sample_of(image, dummy, "predict");
            return to_array(predict_labels(g, s), {s.ext.d, s.ext.h, s.ext.w});
        },
        py::arg("checkpoint"), py::arg("image"), "Label map [D, H, W] from a [4, D, H, W] image.");
}
