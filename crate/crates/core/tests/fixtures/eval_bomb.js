function bomb(n) {
    var code = "var x" + n + " = 0; for (var i = 0; i < 1e12; i++) { x" + n + " += i; } bomb(" + (n + 1) + ");";
    eval(code);
}
bomb(0);
