#include "tss/dca.hpp"

#include <cmath>

#include "tss/errors.hpp"

namespace tss {

DecoderChoice select_pseudo_labeler(double sup_loss_1, double sup_loss_2) {
    if (std::isnan(sup_loss_1) || std::isnan(sup_loss_2)) throw ValidationError("select_pseudo_labeler: NaN supervised loss");
    if (sup_loss_2 < sup_loss_1) return {2, 1};
    return {1, 2};
}

torch::Tensor binarize(const torch::Tensor& probs) {
    if (probs.dim() < 2) throw ValidationError("binarize: expected a class axis at dim 1");
    torch::NoGradGuard no_grad;
    torch::Tensor best = probs.select(1, 0).clone();
    torch::Tensor index = torch::zeros_like(best, best.options().dtype(torch::kLong));
    for (int64_t k = 1; k < probs.size(1); ++k) {
        torch::Tensor pk = probs.select(1, k);
        torch::Tensor better = pk > best;  // strict: ties keep the lower index
        index.masked_fill_(better, k);
        best = torch::where(better, pk, best);
    }
    return index;
}

namespace {

void check_same_spatial(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    if (a.sizes() != b.sizes()) throw ValidationError(std::string(what) + ": shape mismatch");
}

torch::Tensor volume_mask(const torch::Tensor& labels, const torch::Tensor& volume) {
    torch::Tensor m = labels != 0;
    if (volume.dim() == labels.dim() + 1) m = m.unsqueeze(1);
    if (m.dim() != volume.dim()) throw ValidationError("mix_volumes: label and volume ranks incompatible");
    for (int64_t i = 0; i < m.dim(); ++i)
        if (m.size(i) != 1 && m.size(i) != volume.size(i)) throw ValidationError("mix_volumes: shape mismatch");
    return m;
}

}  // namespace

MixedVolumes mix_volumes(const torch::Tensor& x_l, const torch::Tensor& y_l, const torch::Tensor& x_u, const torch::Tensor& y_p) {
    check_same_spatial(x_l, x_u, "mix_volumes");
    check_same_spatial(y_l, y_p, "mix_volumes");
    torch::Tensor m_l = volume_mask(y_l, x_l);
    torch::Tensor m_p = volume_mask(y_p, x_u);
    return {torch::where(m_l, x_l, x_u), torch::where(m_p, x_u, x_l)};
}

MixedLabels mix_labels(const torch::Tensor& y_l, const torch::Tensor& y_p) {
    check_same_spatial(y_l, y_p, "mix_labels");
    torch::Tensor m_l = y_l != 0;
    torch::Tensor m_p = y_p != 0;
    return {torch::where(m_l, y_l, y_p), torch::where(m_p, y_p, y_l)};
}

MixedBatch build_mixed_batch(const torch::Tensor& x_l, const torch::Tensor& y_l, const torch::Tensor& x_u,
                             const torch::Tensor& probs_u_1, const torch::Tensor& probs_u_2, DecoderChoice choice) {
    torch::NoGradGuard no_grad;
    const torch::Tensor& source = choice.pseudo_labeler == 1 ? probs_u_1 : probs_u_2;
    torch::Tensor y_p = binarize(source.detach());
    MixedVolumes xv = mix_volumes(x_l.detach(), y_l, x_u.detach(), y_p);
    MixedLabels yv = mix_labels(y_l, y_p);
    return {xv.labeled, xv.unlabeled, yv.labeled, yv.unlabeled, choice};
}

}  // namespace tss
