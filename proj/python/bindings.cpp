#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "blindnet/checkpoint.hpp"
#include "blindnet/config.hpp"
#include "blindnet/data.hpp"
#include "blindnet/metrics.hpp"
#include "blindnet/model.hpp"

namespace py = pybind11;
using namespace blindnet;

namespace {

Image array_to_image(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 3 || a.shape(0) != 3)
        throw std::invalid_argument("expected a (3, H, W) float array in [0, 1]");
    Image img(3, static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)));
    std::copy(a.data(), a.data() + a.size(), img.data.begin());
    return img;
}

py::array_t<double> image_to_array(const Image& img) {
    py::array_t<double> out({img.channels, img.height, img.width});
    std::copy(img.data.begin(), img.data.end(), out.mutable_data());
    return out;
}

py::array_t<uint8_t> mask_to_array(const Mask& m) {
    py::array_t<uint8_t> out({m.height, m.width});
    std::copy(m.data.begin(), m.data.end(), out.mutable_data());
    return out;
}

// Frozen model handle around a checkpoint.
struct PyModel {
    RunConfig cfg;
    BlindNet model;

    explicit PyModel(const std::string& path)
        : cfg(parse_config_text(load_checkpoint(path).config_text)),
          model(
              [&] {
                  BlindNetConfig mc;
                  mc.image_size = cfg.image_size;
                  mc.base_channels = cfg.base_channels;
                  mc.bottom_codes = cfg.bottom_codes;
                  mc.bottom_dim = cfg.bottom_dim;
                  mc.top_codes = cfg.top_codes;
                  mc.top_dim = cfg.top_dim;
                  mc.beta = cfg.beta;
                  mc.ema_decay = cfg.ema_decay;
                  mc.latent_loss_pre_quant = cfg.latent_pre_quant;
                  return mc;
              }(),
              cfg.seed) {
        unpack_model(load_checkpoint(path), model);
    }

    py::dict encode(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) const {
        Image img = array_to_image(a);
        Tape tape;
        HierLatent lat = model.encode_hier(tape, image_to_tensor(img));
        py::dict out;
        out["indices_bottom"] = lat.indices_bottom;
        out["indices_top"] = lat.indices_top;
        py::array_t<double> e(lat.e_concat->shape.size() == 4
                                  ? std::vector<py::ssize_t>{lat.e_concat->shape[1],
                                                             lat.e_concat->shape[2],
                                                             lat.e_concat->shape[3]}
                                  : std::vector<py::ssize_t>{});
        std::copy(lat.e_concat->data.begin(), lat.e_concat->data.end(), e.mutable_data());
        out["e_concat"] = e;
        return out;
    }

    py::array_t<double> reconstruct(
        const py::array_t<double, py::array::c_style | py::array::forcecast>& a) const {
        Image img = array_to_image(a);
        Tape tape;
        HierLatent lat = model.encode_hier(tape, image_to_tensor(img));
        TensorPtr recon = model.decode(tape, lat.e_concat);
        return image_to_array(tensor_to_image(*recon));
    }

    int image_size() const { return cfg.image_size; }
    std::string mode() const { return cfg.mode; }
};

}  // namespace

PYBIND11_MODULE(_blindnet, m) {
    m.doc() = "vector-quantized blindness autoencoder core";

    m.def(
        "generate_corpus",
        [](uint64_t seed, int count, int size, const std::string& out_dir) {
            GenConfig gc;
            gc.seed = seed;
            gc.count = count;
            gc.size = size;
            Corpus corpus = generate_corpus(gc);
            if (!out_dir.empty()) save_corpus(corpus, out_dir);
            return corpus.items.size();
        },
        py::arg("seed"), py::arg("count"), py::arg("size") = 48, py::arg("out_dir") = "",
        "Generate the synthetic corpus; returns the item count.");

    m.def(
        "render_scene",
        [](uint64_t seed, int index, int size) {
            GenConfig gc;
            gc.seed = seed;
            gc.count = index + 1;
            gc.size = size;
            Corpus corpus = generate_corpus(gc);
            const CorpusItem& item = corpus.items.at(index);
            return py::make_tuple(image_to_array(item.image), mask_to_array(item.mask),
                                  item.has_car);
        },
        py::arg("seed"), py::arg("index") = 0, py::arg("size") = 48,
        "Render one corpus scene: (image, class_mask, has_car).");

    m.def(
        "overlay_sample",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& clean,
           uint64_t seed) {
            Rng rng(seed);
            OverlaySample s = overlay(array_to_image(clean), rng, seed);
            return py::make_tuple(image_to_array(s.overlaid), mask_to_array(s.mask));
        },
        py::arg("clean"), py::arg("seed"),
        "Composite a distractor sprite: (overlaid, mask).");

    m.def(
        "image_metrics",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
            MetricReport r = image_metrics(array_to_image(a), array_to_image(b));
            py::dict out;
            out["l1"] = r.l1;
            out["mse"] = r.mse;
            out["psnr"] = r.psnr;
            out["count"] = r.count;
            return out;
        },
        py::arg("a"), py::arg("b"), "L1/MSE/PSNR between two (3, H, W) images.");

    m.def(
        "save_initial_checkpoint",
        [](const std::string& path, uint64_t seed, int image_size, int base_channels) {
            RunConfig cfg;
            cfg.seed = seed;
            cfg.image_size = image_size;
            cfg.base_channels = base_channels;
            cfg.validate();
            BlindNetConfig mc;
            mc.image_size = cfg.image_size;
            mc.base_channels = cfg.base_channels;
            BlindNet model(mc, seed);
            Checkpoint ckpt;
            ckpt.config_text = cfg.serialize();
            pack_model(ckpt, model);
            save_checkpoint(path, ckpt);
        },
        py::arg("path"), py::arg("seed") = 7, py::arg("image_size") = 48,
        py::arg("base_channels") = 32,
        "Write a freshly initialized (untrained) model checkpoint.");

    m.def("step_lr", &step_lr, py::arg("epoch"), py::arg("base_lr"), py::arg("step_size"),
          py::arg("gamma"), "Step-decay learning-rate schedule.");

    py::class_<PyModel>(m, "Model")
        .def(py::init<const std::string&>(), py::arg("checkpoint_path"))
        .def("encode", &PyModel::encode, py::arg("image"),
             "Quantized latent of a (3, H, W) image: indices and e_concat.")
        .def("reconstruct", &PyModel::reconstruct, py::arg("image"),
             "decode(encode(image)) as a (3, H, W) array.")
        .def_property_readonly("image_size", &PyModel::image_size)
        .def_property_readonly("mode", &PyModel::mode);
}
