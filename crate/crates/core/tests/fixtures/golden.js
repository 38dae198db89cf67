var a = null;
var b = c + 1;
var d = a.length;
var func = null;
a = "Hello World";
var e = new abc();
if (b < 5) {
    func = function(x) {
        return x
    };
}
d = func(6);
var f = Math.abs(d);
array[5] = f;
