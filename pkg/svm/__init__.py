"""SVM package - SMO on precomputed kernels, one-vs-rest for more than two classes"""

from svm.smo import (
    OneVsRestSvm,
    SvmModel,
    kkt_residuals,
    smo_train,
    svm_predict,
    train_multiclass,
)
