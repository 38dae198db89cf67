(function (window, undefined) {
    var document = window.document;
    var jQuery = function (selector, context) {
        return new jQuery.fn.init(selector, context);
    };
    jQuery.fn = jQuery.prototype = {
        init: function (selector, context) {
            this.selector = selector;
            this.context = context || document;
            this.length = 0;
            return this;
        },
        each: function (cb) {
            for (var i = 0; i < this.length; i++) {
                if (cb.call(this[i], i, this[i]) === false) break;
            }
            return this;
        }
    };
    jQuery.fn.init.prototype = jQuery.fn;
    jQuery.extend = function (target, src) {
        for (var k in src) {
            if (src.hasOwnProperty(k)) target[k] = src[k];
        }
        return target;
    };
    jQuery.extend(jQuery, {
        isFunction: function (obj) { return typeof obj === "function"; },
        trim: function (s) { return s == null ? "" : String(s).replace(/^\s+|\s+$/g, ""); }
    });
    if (typeof window.jQuery === "undefined") {
        window.jQuery = window.$ = jQuery;
    }
})(window);
$(function () {
    var items = ["home", "about", "contact"];
    var html = "";
    for (var i = 0; i < items.length; i++) {
        html += "<li>" + items[i] + "</li>";
    }
    document.write("<ul>" + html + "</ul>");
});
